//! Canonical indirect measurement models: the no-interaction model, the
//! repeatable (entangling) model, the absorbing counter, the controlled model
//! realizing the Lüders instrument, randomly generated apparatuses measuring
//! a given observable, and the embedding of a model into one subsystem of a
//! bipartite system.

use crate::error::{Error, Result};
use crate::instruments::IndirectModel;
use crate::linalg::{complete_orthonormal_basis, CMatrix, DimSplit, C64};
use crate::observables::{DensityOperator, DiscreteObservable, StateVector};
use rand::Rng;

/// Model with U = I: the probe never couples, every branch scales the input
/// by the Born weight of the probe outcome in σ.
pub fn trivial_model(
    sys_dim: usize,
    probe_state: &DensityOperator,
    probe_observable: &DiscreteObservable,
) -> Result<IndirectModel> {
    let k = probe_state.dim();
    IndirectModel::new(
        sys_dim,
        k,
        probe_state.clone(),
        CMatrix::identity(sys_dim * k),
        probe_observable.clone(),
    )
}

fn eigenbasis_of(obs: &DiscreteObservable) -> Result<Vec<StateVector>> {
    if !obs.is_nondegenerate() {
        return Err(Error::Model(
            "this model requires a nondegenerate observable".into(),
        ));
    }
    obs.eigenbasis()
}

/// Probe observable living on the standard basis of the probe space with the
/// given outcome values.
fn standard_probe_observable(values: &[f64], probe_dim: usize) -> Result<DiscreteObservable> {
    let projections = (0..values.len())
        .map(|n| CMatrix::matrix_unit(probe_dim, n, n))
        .collect();
    // values.len() == probe_dim for the models below
    DiscreteObservable::new(values.to_vec(), projections)
}

/// Transposition of probe levels 0 and n, with an extra phase on the 0→n
/// transition.
fn pointer_shift(probe_dim: usize, n: usize, phase: f64) -> CMatrix {
    let mut w = CMatrix::identity(probe_dim);
    if n > 0 {
        w.set(0, 0, C64::new(0.0, 0.0));
        w.set(n, n, C64::new(0.0, 0.0));
        w.set(n, 0, C64::from_polar(1.0, phase));
        w.set(0, n, C64::new(1.0, 0.0));
    } else {
        w.set(0, 0, C64::from_polar(1.0, phase));
    }
    w
}

/// Repeatable measurement of a nondegenerate observable: the interaction
/// sends φₙ⊗ξ to e^{iθₙ}·φₙ⊗ξₙ. The phases are physically irrelevant and
/// default to zero.
pub fn repeatable_model(obs: &DiscreteObservable, phases: Option<&[f64]>) -> Result<IndirectModel> {
    let basis = eigenbasis_of(obs)?;
    let d = obs.dim();
    if let Some(ph) = phases {
        if ph.len() != d {
            return Err(Error::Model(format!(
                "expected {d} phases, got {}",
                ph.len()
            )));
        }
    }
    let mut u = CMatrix::zeros(d * d, d * d);
    for (n, phi) in basis.iter().enumerate() {
        let theta = phases.map(|p| p[n]).unwrap_or(0.0);
        let proj = phi.projector();
        u = &u + &proj.kron(&pointer_shift(d, n, theta));
    }
    IndirectModel::new(
        d,
        d,
        StateVector::basis(d, 0).to_density(),
        u,
        standard_probe_observable(obs.values(), d)?,
    )
}

/// Absorbing counter: the interaction sends φₙ⊗ξ to χ₀⊗ξₙ, dumping the
/// system into a fixed reference state while the probe records the outcome.
/// Measures the observable but violates repeatability for dim ≥ 2.
pub fn counter_model(obs: &DiscreteObservable) -> Result<IndirectModel> {
    let basis = eigenbasis_of(obs)?;
    let d = obs.dim();
    let total = d * d;

    let mut domain: Vec<Vec<C64>> = Vec::with_capacity(total);
    let mut targets: Vec<Vec<C64>> = Vec::with_capacity(d);
    for (n, phi) in basis.iter().enumerate() {
        domain.push(phi.tensor(&StateVector::basis(d, 0)).amplitudes().to_vec());
        targets.push(
            StateVector::basis(d, 0)
                .tensor(&StateVector::basis(d, n))
                .amplitudes()
                .to_vec(),
        );
    }
    for j in 1..d {
        for phi in &basis {
            domain.push(phi.tensor(&StateVector::basis(d, j)).amplitudes().to_vec());
        }
    }
    let targets = complete_orthonormal_basis(&targets, total);
    let u = unitary_from_correspondence(&domain, &targets);
    IndirectModel::new(
        d,
        d,
        StateVector::basis(d, 0).to_density(),
        u,
        standard_probe_observable(obs.values(), d)?,
    )
}

/// Counter measuring the number observable on a truncated d-level mode: on
/// the number state |n⟩ the apparatus absorbs all quanta, leaving the system
/// in |0⟩ with the probe recording n.
pub fn photon_counter_model(dim: usize) -> Result<IndirectModel> {
    counter_model(&DiscreteObservable::number(dim))
}

/// Controlled-shift model whose instrument is exactly the Lüders instrument
/// of the observable; handles degenerate spectra.
pub fn luders_model(obs: &DiscreteObservable) -> Result<IndirectModel> {
    let d = obs.dim();
    let m = obs.num_outcomes();
    let mut u = CMatrix::zeros(d * m, d * m);
    for (n, proj) in obs.projections().iter().enumerate() {
        u = &u + &proj.kron(&pointer_shift(m, n, 0.0));
    }
    IndirectModel::new(
        d,
        m,
        StateVector::basis(m, 0).to_density(),
        u,
        standard_probe_observable(obs.values(), m)?,
    )
}

/// Random apparatus measuring `obs`: each eigenspace is mapped by a random
/// isometry into system⊗(probe block n), where block n carries the probe
/// projection for outcome n. `probe_mult` is the block width; widths > 1
/// produce branches with entangled, non-projective posteriors.
pub fn random_measuring_model(
    obs: &DiscreteObservable,
    probe_mult: usize,
    rng: &mut impl Rng,
) -> Result<IndirectModel> {
    if probe_mult == 0 {
        return Err(Error::Model("probe block width must be positive".into()));
    }
    let d = obs.dim();
    let m = obs.num_outcomes();
    let k = m * probe_mult;
    let total = d * k;

    let mut domain: Vec<Vec<C64>> = Vec::new();
    let mut targets: Vec<Vec<C64>> = Vec::new();
    for (n, proj) in obs.projections().iter().enumerate() {
        let rank = proj.trace().re.round() as usize;
        let eig = crate::linalg::hermitian_eigensystem(proj)?;
        let block = crate::sample::random_unitary(d * probe_mult, rng);
        for r in 0..rank {
            let phi = eig.eigenvector(r);
            let mut dom = vec![C64::new(0.0, 0.0); total];
            for (i, &a) in phi.iter().enumerate() {
                dom[i * k] = a; // ⊗ |0⟩ of the probe
            }
            domain.push(dom);
            let mut tgt = vec![C64::new(0.0, 0.0); total];
            for i in 0..d {
                for beta in 0..probe_mult {
                    tgt[i * k + n * probe_mult + beta] = block.get(i * probe_mult + beta, r);
                }
            }
            targets.push(tgt);
        }
    }
    let domain = complete_orthonormal_basis(&domain, total);
    let targets = complete_orthonormal_basis(&targets, total);
    let u = unitary_from_correspondence(&domain, &targets);

    let probe_projections: Vec<CMatrix> = (0..m)
        .map(|n| {
            let mut p = CMatrix::zeros(k, k);
            for beta in 0..probe_mult {
                p.set(
                    n * probe_mult + beta,
                    n * probe_mult + beta,
                    C64::new(1.0, 0.0),
                );
            }
            p
        })
        .collect();
    let probe_obs = DiscreteObservable::new(obs.values().to_vec(), probe_projections)?;
    IndirectModel::new(d, k, StateVector::basis(k, 0).to_density(), u, probe_obs)
}

/// Embeds a model for subsystem 1 into the bipartite system H₁⊗H₂ (system
/// ordering S₁⊗S₂⊗probe), acting as the identity on H₂. The result is local
/// in S₁ and measures C⊗I₂ when the inner model measures C.
pub fn embed_local(model: &IndirectModel, other_dim: usize) -> Result<IndirectModel> {
    let d1 = model.sys_dim();
    let k = model.probe_dim();
    let to_inner = DimSplit::new(vec![d1, other_dim, k])?.permutation_unitary(&[0, 2, 1])?;
    let back = DimSplit::new(vec![d1, k, other_dim])?.permutation_unitary(&[0, 2, 1])?;
    let u = back
        .matmul(&model.interaction().kron(&CMatrix::identity(other_dim)))
        .matmul(&to_inner);
    IndirectModel::new(
        d1 * other_dim,
        k,
        model.probe_state().clone(),
        u,
        model.probe_observable().clone(),
    )
}

/// Unitary sending the i-th domain basis vector to the i-th target basis
/// vector; both families must be orthonormal bases.
fn unitary_from_correspondence(domain: &[Vec<C64>], targets: &[Vec<C64>]) -> CMatrix {
    let total = domain.len();
    let d_mat = CMatrix::from_fn(total, total, |i, j| domain[j][i]);
    let t_mat = CMatrix::from_fn(total, total, |i, j| targets[j][i]);
    t_mat.matmul(&d_mat.dagger())
}
