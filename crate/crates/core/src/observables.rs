//! States, discrete observables with spectral projections, Born-rule
//! statistics, and commutativity tests.

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigensystem, CMatrix, C64, CLUSTER_TOL, TOL};
use std::collections::BTreeSet;

/// Normalized state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        let norm = amps.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > TOL {
            return Err(Error::InvalidState(format!(
                "state vector norm {norm} is not 1"
            )));
        }
        Ok(Self { amps })
    }

    /// Normalizes the amplitudes; fails on the zero vector.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        let norm = amps.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm <= TOL {
            return Err(Error::InvalidState(
                "cannot normalize the zero vector".into(),
            ));
        }
        Ok(Self {
            amps: amps.into_iter().map(|x| x / norm).collect(),
        })
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Self { amps }
    }

    pub fn projector(&self) -> CMatrix {
        CMatrix::outer(&self.amps, &self.amps)
    }

    pub fn to_density(&self) -> DensityOperator {
        DensityOperator {
            mat: self.projector(),
        }
    }
}

/// Positive unit-trace operator: the state ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    mat: CMatrix,
}

impl DensityOperator {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::Dimension("density operator must be square".into()));
        }
        if !mat.is_hermitian(TOL) {
            return Err(Error::InvalidState(
                "density operator is not Hermitian".into(),
            ));
        }
        let tr = mat.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > TOL {
            return Err(Error::InvalidState(format!(
                "density operator trace {} is not 1",
                tr.re
            )));
        }
        let eig = hermitian_eigensystem(&mat)?;
        let min = eig.values.last().copied().unwrap_or(0.0);
        if min < -TOL {
            return Err(Error::InvalidState(format!(
                "density operator has negative eigenvalue {min}"
            )));
        }
        Ok(Self { mat })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            mat: CMatrix::identity(dim).scale_re(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Convex mixture αρ₁ + (1−α)ρ₂.
    pub fn mix(alpha: f64, rho1: &Self, rho2: &Self) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidState(
                "mixture weight must lie in [0,1]".into(),
            ));
        }
        Self::new(&rho1.mat.scale_re(alpha) + &rho2.mat.scale_re(1.0 - alpha))
    }

    /// Largest eigenvalue and its eigenvector; the state is pure when the
    /// eigenvalue is 1.
    pub fn dominant_eigenvector(&self) -> Result<(f64, StateVector)> {
        let eig = hermitian_eigensystem(&self.mat)?;
        let v = eig.eigenvector(0);
        Ok((eig.values[0], StateVector::normalized(v)?))
    }
}

/// Finite subset of the outcome indices of a [`DiscreteObservable`]; stands
/// in for a Borel set on the real line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeSet {
    indices: BTreeSet<usize>,
}

impl OutcomeSet {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Self {
        Self {
            indices: indices.into_iter().collect(),
        }
    }

    pub fn empty() -> Self {
        Self {
            indices: BTreeSet::new(),
        }
    }

    pub fn singleton(i: usize) -> Self {
        Self::new([i])
    }

    pub fn all(n: usize) -> Self {
        Self::new(0..n)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.indices.iter().next_back().copied()
    }
}

/// Observable with a discrete spectrum: eigenvalues paired with orthogonal
/// spectral projections resolving the identity. Degenerate eigenvalues are
/// first-class; projections may have rank > 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteObservable {
    dim: usize,
    values: Vec<f64>,
    projections: Vec<CMatrix>,
}

impl DiscreteObservable {
    pub fn new(values: Vec<f64>, projections: Vec<CMatrix>) -> Result<Self> {
        if values.is_empty() || values.len() != projections.len() {
            return Err(Error::InvalidObservable(
                "need one projection per outcome value".into(),
            ));
        }
        let dim = projections[0].rows();
        for p in &projections {
            if !p.is_square() || p.rows() != dim {
                return Err(Error::InvalidObservable(
                    "projections must be square matrices of equal dimension".into(),
                ));
            }
            if !p.is_projection(TOL) {
                return Err(Error::InvalidObservable(
                    "each outcome needs a Hermitian idempotent projection".into(),
                ));
            }
        }
        for i in 0..projections.len() {
            for j in 0..i {
                if projections[i].matmul(&projections[j]).max_abs_entry() > TOL {
                    return Err(Error::InvalidObservable(format!(
                        "projections {j} and {i} are not orthogonal"
                    )));
                }
                if (values[i] - values[j]).abs() <= CLUSTER_TOL {
                    return Err(Error::InvalidObservable(format!(
                        "outcome values {} and {} are not distinct",
                        values[j], values[i]
                    )));
                }
            }
        }
        let sum = projections
            .iter()
            .fold(CMatrix::zeros(dim, dim), |acc, p| &acc + p);
        if !sum.approx_eq(&CMatrix::identity(dim), TOL) {
            return Err(Error::InvalidObservable(
                "projections do not resolve the identity".into(),
            ));
        }
        Ok(Self {
            dim,
            values,
            projections,
        })
    }

    /// Spectral decomposition of a Hermitian matrix, clustering eigenvalues
    /// within [`CLUSTER_TOL`] into degenerate outcomes. Outcomes are ordered
    /// by descending eigenvalue.
    pub fn from_hermitian(m: &CMatrix) -> Result<Self> {
        let eig = hermitian_eigensystem(m)?;
        let d = m.rows();
        let mut values = Vec::new();
        let mut projections = Vec::new();
        let mut k = 0;
        while k < d {
            let mut end = k + 1;
            while end < d && (eig.values[end - 1] - eig.values[end]).abs() <= CLUSTER_TOL {
                end += 1;
            }
            let cluster = &eig.values[k..end];
            let value = cluster.iter().sum::<f64>() / cluster.len() as f64;
            let mut proj = CMatrix::zeros(d, d);
            for col in k..end {
                let v = eig.eigenvector(col);
                proj = &proj + &CMatrix::outer(&v, &v);
            }
            values.push(value);
            projections.push(proj);
            k = end;
        }
        Self::new(values, projections)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            values: vec![1.0],
            projections: vec![CMatrix::identity(dim)],
        }
    }

    /// Number observable N = Σ n·|n⟩⟨n|, outcomes 0..dim−1 in ascending order.
    pub fn number(dim: usize) -> Self {
        let values: Vec<f64> = (0..dim).map(|n| n as f64).collect();
        let projections = (0..dim).map(|n| CMatrix::matrix_unit(dim, n, n)).collect();
        Self {
            dim,
            values,
            projections,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_outcomes(&self) -> usize {
        self.values.len()
    }

    pub fn value(&self, n: usize) -> f64 {
        self.values[n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn projection(&self, n: usize) -> &CMatrix {
        &self.projections[n]
    }

    pub fn projections(&self) -> &[CMatrix] {
        &self.projections
    }

    /// True when every spectral projection is rank 1.
    pub fn is_nondegenerate(&self) -> bool {
        self.projections
            .iter()
            .all(|p| (p.trace().re - 1.0).abs() <= 1e-6)
    }

    /// For a nondegenerate observable, the eigenvector of each outcome.
    pub fn eigenbasis(&self) -> Result<Vec<StateVector>> {
        self.projections
            .iter()
            .map(|p| {
                if (p.trace().re - 1.0).abs() > 1e-6 {
                    return Err(Error::InvalidObservable(
                        "eigenbasis requires a nondegenerate observable".into(),
                    ));
                }
                let eig = hermitian_eigensystem(p)?;
                StateVector::normalized(eig.eigenvector(0))
            })
            .collect()
    }

    /// Reassembles the Hermitian matrix Σ aₙ·Pₙ.
    pub fn matrix(&self) -> CMatrix {
        self.values
            .iter()
            .zip(self.projections.iter())
            .fold(CMatrix::zeros(self.dim, self.dim), |acc, (&a, p)| {
                &acc + &p.scale_re(a)
            })
    }

    fn check_outcomes(&self, set: &OutcomeSet) -> Result<()> {
        if let Some(max) = set.max_index() {
            if max >= self.num_outcomes() {
                return Err(Error::Outcome(format!(
                    "index {} out of range for {} outcomes",
                    max,
                    self.num_outcomes()
                )));
            }
        }
        Ok(())
    }

    /// Spectral projection of the outcome subset: Σ_{n∈Δ} Pₙ.
    pub fn spectral_projection(&self, set: &OutcomeSet) -> Result<CMatrix> {
        self.check_outcomes(set)?;
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for n in set.iter() {
            out = &out + &self.projections[n];
        }
        Ok(out)
    }

    /// Born probability Tr[E(Δ)ρ], clamped to [0, 1].
    pub fn born_probability(&self, set: &OutcomeSet, rho: &DensityOperator) -> Result<f64> {
        if rho.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "state dimension {} does not match observable dimension {}",
                rho.dim(),
                self.dim
            )));
        }
        let proj = self.spectral_projection(set)?;
        let p = proj.matmul(rho.matrix()).trace().re;
        debug_assert!(
            (-TOL..=1.0 + TOL).contains(&p),
            "Born probability {p} out of range"
        );
        Ok(p.clamp(0.0, 1.0))
    }

    /// True iff all spectral projections of the two observables commute;
    /// equivalent to commutation of the operators themselves.
    pub fn commutes_with(&self, other: &Self) -> Result<bool> {
        Ok(self.commutation_residual(other)? <= TOL)
    }

    pub fn commutation_residual(&self, other: &Self) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "observable dimensions {} and {} differ",
                self.dim, other.dim
            )));
        }
        let mut worst = 0.0f64;
        for p in &self.projections {
            for q in &other.projections {
                let comm = &p.matmul(q) - &q.matmul(p);
                worst = worst.max(comm.op_norm());
            }
        }
        Ok(worst)
    }
}
