//! Deterministic random generators for states, operators, observables, and
//! measurement models. Used by the audits, the property tests, and the CLI's
//! seeded checks.

use crate::instruments::IndirectModel;
use crate::linalg::{CMatrix, C64};
use crate::observables::{DensityOperator, DiscreteObservable, StateVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn complex_gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

pub fn random_matrix(dim: usize, rng: &mut impl Rng) -> CMatrix {
    let data = (0..dim * dim).map(|_| complex_gaussian(rng)).collect();
    CMatrix::new(dim, dim, data).expect("consistent dimensions")
}

pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> CMatrix {
    let g = random_matrix(dim, rng);
    (&g + &g.dagger()).scale_re(0.5)
}

/// Haar-ish random unitary: Gram–Schmidt of a Gaussian matrix.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> CMatrix {
    loop {
        let g = random_matrix(dim, rng);
        let mut cols: Vec<Vec<C64>> = Vec::with_capacity(dim);
        let mut ok = true;
        for j in 0..dim {
            let mut v: Vec<C64> = (0..dim).map(|i| g.get(i, j)).collect();
            for _ in 0..2 {
                for b in &cols {
                    let overlap: C64 = b.iter().zip(v.iter()).map(|(bi, vi)| bi.conj() * vi).sum();
                    for (vi, bi) in v.iter_mut().zip(b.iter()) {
                        *vi -= overlap * bi;
                    }
                }
            }
            let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            for x in v.iter_mut() {
                *x /= norm;
            }
            cols.push(v);
        }
        if ok {
            return CMatrix::from_fn(dim, dim, |i, j| cols[j][i]);
        }
    }
}

pub fn random_state(dim: usize, rng: &mut impl Rng) -> StateVector {
    loop {
        let amps: Vec<C64> = (0..dim).map(|_| complex_gaussian(rng)).collect();
        if let Ok(v) = StateVector::normalized(amps) {
            return v;
        }
    }
}

/// Full-rank random density operator GG†/Tr[GG†].
pub fn random_density(dim: usize, rng: &mut impl Rng) -> DensityOperator {
    let g = random_matrix(dim, rng);
    let pos = g.matmul(&g.dagger());
    let tr = pos.trace().re;
    DensityOperator::new(pos.scale_re(1.0 / tr)).expect("GG†/Tr is a valid state")
}

/// Random observable with all eigenvalues distinct (rank-1 projections).
pub fn random_nondegenerate_observable(dim: usize, rng: &mut impl Rng) -> DiscreteObservable {
    let u = random_unitary(dim, rng);
    let mut values: Vec<f64> = (0..dim)
        .map(|k| k as f64 + rng.gen_range(-0.3..0.3))
        .collect();
    values.reverse(); // descending, matching the spectral ordering convention
    let projections = (0..dim)
        .map(|k| {
            let col: Vec<C64> = (0..dim).map(|i| u.get(i, k)).collect();
            CMatrix::outer(&col, &col)
        })
        .collect();
    DiscreteObservable::new(values, projections).expect("orthonormal columns")
}

/// Random observable with a prescribed number of outcomes; eigenspace ranks
/// are distributed as evenly as possible, so fewer outcomes than `dim` give
/// degenerate eigenvalues.
pub fn random_observable(dim: usize, outcomes: usize, rng: &mut impl Rng) -> DiscreteObservable {
    assert!(outcomes >= 1 && outcomes <= dim);
    let u = random_unitary(dim, rng);
    let mut ranks = vec![dim / outcomes; outcomes];
    for r in ranks.iter_mut().take(dim % outcomes) {
        *r += 1;
    }
    let mut projections = Vec::with_capacity(outcomes);
    let mut col = 0;
    for &r in &ranks {
        let mut p = CMatrix::zeros(dim, dim);
        for k in col..col + r {
            let v: Vec<C64> = (0..dim).map(|i| u.get(i, k)).collect();
            p = &p + &CMatrix::outer(&v, &v);
        }
        projections.push(p);
        col += r;
    }
    let values: Vec<f64> = (0..outcomes)
        .map(|k| (outcomes - k) as f64 + rng.gen_range(-0.3..0.3))
        .collect();
    DiscreteObservable::new(values, projections).expect("orthonormal blocks")
}

/// Arbitrary indirect measurement model: random mixed probe state, random
/// interaction unitary, random nondegenerate probe observable.
pub fn random_model(sys_dim: usize, probe_dim: usize, rng: &mut impl Rng) -> IndirectModel {
    let sigma = random_density(probe_dim, rng);
    let u = random_unitary(sys_dim * probe_dim, rng);
    let m = random_nondegenerate_observable(probe_dim, rng);
    IndirectModel::new(sys_dim, probe_dim, sigma, u, m).expect("constructed to be valid")
}

/// Like [`random_model`] but with a pure probe state.
pub fn random_pure_probe_model(
    sys_dim: usize,
    probe_dim: usize,
    rng: &mut impl Rng,
) -> IndirectModel {
    let sigma = random_state(probe_dim, rng).to_density();
    let u = random_unitary(sys_dim * probe_dim, rng);
    let m = random_nondegenerate_observable(probe_dim, rng);
    IndirectModel::new(sys_dim, probe_dim, sigma, u, m).expect("constructed to be valid")
}
