//! Operation-valued measures (instruments): construction from indirect
//! measurement models, canonical Lüders and von Neumann instruments,
//! nonselective operations and duals, axiom auditing, compatibility, and the
//! factoring identities.

use crate::error::{Error, Result};
use crate::linalg::{devectorize, hermitian_eigensystem, CMatrix, DimSplit, CLUSTER_TOL, TOL};
use crate::observables::{DensityOperator, DiscreteObservable, OutcomeSet, StateVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Linear map on d×d matrices, stored as a d²×d² matrix acting on
/// column-stacked vectorizations.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    rep: CMatrix,
}

impl Superoperator {
    pub fn from_rep(rep: CMatrix) -> Result<Self> {
        if !rep.is_square() {
            return Err(Error::Dimension(
                "superoperator matrix must be square".into(),
            ));
        }
        let d = (rep.rows() as f64).sqrt().round() as usize;
        if d * d != rep.rows() {
            return Err(Error::Dimension(format!(
                "superoperator size {} is not a perfect square",
                rep.rows()
            )));
        }
        Ok(Self { dim: d, rep })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            rep: CMatrix::identity(dim * dim),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            rep: CMatrix::zeros(dim * dim, dim * dim),
        }
    }

    /// Builds the matrix representation by applying the map to every matrix
    /// unit of the domain.
    pub fn from_map(dim: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let d2 = dim * dim;
        let mut rep = CMatrix::zeros(d2, d2);
        for j in 0..dim {
            for i in 0..dim {
                let out = f(&CMatrix::matrix_unit(dim, i, j)).vectorize();
                let col = j * dim + i; // vec(E_ij) = e_{j·d+i}
                for (row, &x) in out.iter().enumerate() {
                    rep.set(row, col, x);
                }
            }
        }
        Self { dim, rep }
    }

    /// The map ρ ↦ AρB, with representation Bᵀ ⊗ A.
    pub fn sandwich(a: &CMatrix, b: &CMatrix) -> Result<Self> {
        if !a.is_square() || !b.is_square() || a.rows() != b.rows() {
            return Err(Error::Dimension(
                "sandwich factors must be square matrices of one dimension".into(),
            ));
        }
        Ok(Self {
            dim: a.rows(),
            rep: b.transpose().kron(a),
        })
    }

    /// The map ρ ↦ KρK†.
    pub fn conjugation(k: &CMatrix) -> Result<Self> {
        Self::sandwich(k, &k.dagger())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rep(&self) -> &CMatrix {
        &self.rep
    }

    pub fn apply(&self, m: &CMatrix) -> Result<CMatrix> {
        if !m.is_square() || m.rows() != self.dim {
            return Err(Error::Dimension(format!(
                "superoperator on dimension {} applied to a {}x{} matrix",
                self.dim,
                m.rows(),
                m.cols()
            )));
        }
        devectorize(&self.rep.matvec(&m.vectorize()))
    }

    /// Dual map: the adjoint of the representation in the fixed vectorization
    /// pairing. For Hermiticity-preserving maps (every map built here) this
    /// is the trace-pairing dual satisfying Tr[(L*X)ρ] = Tr[X(Lρ)].
    pub fn dual(&self) -> Self {
        Self {
            dim: self.dim,
            rep: self.rep.dagger(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension("superoperator dimensions differ".into()));
        }
        Ok(Self {
            dim: self.dim,
            rep: &self.rep + &other.rep,
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            rep: self.rep.scale_re(s),
        }
    }

    /// Residual of trace preservation: ‖L*(I) − I‖.
    pub fn trace_preservation_residual(&self) -> f64 {
        let id = CMatrix::identity(self.dim);
        let img = self.dual().apply(&id).expect("dimensions match");
        (&img - &id).op_norm()
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.trace_preservation_residual() <= tol
    }

    pub fn is_unit_preserving(&self, tol: f64) -> bool {
        let id = CMatrix::identity(self.dim);
        self.apply(&id)
            .map(|m| m.approx_eq(&id, tol))
            .unwrap_or(false)
    }

    /// Choi matrix Σ_{ij} E_ij ⊗ L(E_ij); the map is completely positive iff
    /// this is positive semidefinite.
    pub fn choi(&self) -> CMatrix {
        let d = self.dim;
        let mut choi = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let img = self
                    .apply(&CMatrix::matrix_unit(d, i, j))
                    .expect("dimensions match");
                for m in 0..d {
                    for n in 0..d {
                        let v = choi.get(i * d + m, j * d + n) + img.get(m, n);
                        choi.set(i * d + m, j * d + n, v);
                    }
                }
            }
        }
        choi
    }

    /// Smallest eigenvalue of the Choi matrix.
    pub fn min_choi_eigenvalue(&self) -> Result<f64> {
        let eig = hermitian_eigensystem(&self.choi())?;
        Ok(eig.values.last().copied().unwrap_or(0.0))
    }

    pub fn is_completely_positive(&self, tol: f64) -> bool {
        match self.min_choi_eigenvalue() {
            Ok(min) => min >= -tol,
            Err(_) => false, // Choi not Hermitian: map not even Hermiticity-preserving
        }
    }

    /// Kraus decomposition via the Choi spectrum. Fails when the map is not
    /// completely positive.
    pub fn kraus(&self) -> Result<Vec<CMatrix>> {
        let d = self.dim;
        let eig = hermitian_eigensystem(&self.choi())
            .map_err(|_| Error::InvalidState("map is not Hermiticity-preserving".into()))?;
        let mut ops = Vec::new();
        for (k, &lam) in eig.values.iter().enumerate() {
            if lam < -TOL {
                return Err(Error::InvalidState(format!(
                    "map is not completely positive (Choi eigenvalue {lam})"
                )));
            }
            if lam <= 1e-12 {
                continue;
            }
            let v = eig.eigenvector(k);
            let s = lam.sqrt();
            // Choi column index (i·d + m) carries input index i, output index m
            let kraus = CMatrix::from_fn(d, d, |m, i| v[i * d + m] * s);
            ops.push(kraus);
        }
        Ok(ops)
    }

    pub fn from_kraus(dim: usize, ops: &[CMatrix]) -> Result<Self> {
        let mut total = Self::zero(dim);
        for k in ops {
            if !k.is_square() || k.rows() != dim {
                return Err(Error::Dimension("Kraus operator dimension mismatch".into()));
            }
            total = total.add(&Self::conjugation(k)?)?;
        }
        Ok(total)
    }
}

/// Indirect measurement model (K, σ, U, M): probe dimension, probe state,
/// measuring interaction on system⊗probe (system factor first), and the
/// probe observable read out after the interaction.
#[derive(Debug, Clone)]
pub struct IndirectModel {
    sys_dim: usize,
    probe_dim: usize,
    probe_state: DensityOperator,
    interaction: CMatrix,
    probe_observable: DiscreteObservable,
}

impl IndirectModel {
    pub fn new(
        sys_dim: usize,
        probe_dim: usize,
        probe_state: DensityOperator,
        interaction: CMatrix,
        probe_observable: DiscreteObservable,
    ) -> Result<Self> {
        if probe_state.dim() != probe_dim {
            return Err(Error::Model(format!(
                "probe state dimension {} does not match probe dimension {}",
                probe_state.dim(),
                probe_dim
            )));
        }
        if probe_observable.dim() != probe_dim {
            return Err(Error::Model(format!(
                "probe observable dimension {} does not match probe dimension {}",
                probe_observable.dim(),
                probe_dim
            )));
        }
        if interaction.rows() != sys_dim * probe_dim || !interaction.is_square() {
            return Err(Error::Model(format!(
                "interaction must be a {0}x{0} matrix",
                sys_dim * probe_dim
            )));
        }
        if !interaction.is_unitary(TOL) {
            return Err(Error::Model("interaction is not unitary".into()));
        }
        Ok(Self {
            sys_dim,
            probe_dim,
            probe_state,
            interaction,
            probe_observable,
        })
    }

    pub fn sys_dim(&self) -> usize {
        self.sys_dim
    }

    pub fn probe_dim(&self) -> usize {
        self.probe_dim
    }

    pub fn probe_state(&self) -> &DensityOperator {
        &self.probe_state
    }

    pub fn interaction(&self) -> &CMatrix {
        &self.interaction
    }

    pub fn probe_observable(&self) -> &DiscreteObservable {
        &self.probe_observable
    }

    pub fn split(&self) -> DimSplit {
        DimSplit::pair(self.sys_dim, self.probe_dim)
    }

    /// If the probe state is pure, its vector.
    pub fn pure_probe_vector(&self) -> Result<StateVector> {
        let (top, v) = self.probe_state.dominant_eigenvector()?;
        if (top - 1.0).abs() > TOL {
            return Err(Error::MixedProbe);
        }
        Ok(v)
    }

    /// Selective branch action Tr_K[(I⊗E^M{n})U(ρ⊗σ)U†], evaluated directly
    /// from the model data.
    pub fn branch_action(&self, outcome: usize, rho: &CMatrix) -> Result<CMatrix> {
        let proj = self
            .probe_observable
            .spectral_projection(&OutcomeSet::singleton(outcome))?;
        self.selected_action(&proj, rho)
    }

    fn selected_action(&self, probe_proj: &CMatrix, rho: &CMatrix) -> Result<CMatrix> {
        if rho.rows() != self.sys_dim || !rho.is_square() {
            return Err(Error::Dimension(format!(
                "state dimension {} does not match system dimension {}",
                rho.rows(),
                self.sys_dim
            )));
        }
        let joint = rho.kron(self.probe_state.matrix());
        let evolved = self
            .interaction
            .matmul(&joint)
            .matmul(&self.interaction.dagger());
        let selector = CMatrix::identity(self.sys_dim).kron(probe_proj);
        self.split().partial_trace(&selector.matmul(&evolved), 0)
    }

    /// Nonselective state change ρ ↦ Tr_K[U(ρ⊗σ)U†].
    pub fn total_action(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.selected_action(&CMatrix::identity(self.probe_dim), rho)
    }

    pub fn nonselective(&self) -> Superoperator {
        Superoperator::from_map(self.sys_dim, |m| {
            self.total_action(m).expect("matrix-unit dimensions match")
        })
    }

    /// The dual nonselective operation computed directly from the model as
    /// X ↦ Tr_K[U†(X⊗I)U(I⊗σ)], an independent route to `nonselective().dual()`.
    pub fn dual_nonselective_direct(&self) -> Superoperator {
        let ik = CMatrix::identity(self.probe_dim);
        let i_sigma = CMatrix::identity(self.sys_dim).kron(self.probe_state.matrix());
        let udag = self.interaction.dagger();
        Superoperator::from_map(self.sys_dim, |x| {
            let inner = udag
                .matmul(&x.kron(&ik))
                .matmul(&self.interaction)
                .matmul(&i_sigma);
            self.split()
                .partial_trace(&inner, 0)
                .expect("dimensions match")
        })
    }
}

/// Outcome-indexed family of completely positive superoperators with
/// trace-preserving total. Finite additivity over outcome subsets is
/// structural: X(Δ) is computed by summing branches.
#[derive(Debug, Clone)]
pub struct Instrument {
    dim: usize,
    outcome_values: Vec<f64>,
    branches: Vec<Superoperator>,
    observable: Option<DiscreteObservable>,
}

impl Instrument {
    /// Validates the instrument invariants: distinct outcome values, each
    /// branch completely positive, total trace-preserving. Attaches the
    /// measured observable when the branch effects form a projection-valued
    /// resolution of the identity.
    pub fn new(dim: usize, outcome_values: Vec<f64>, branches: Vec<Superoperator>) -> Result<Self> {
        if outcome_values.is_empty() || outcome_values.len() != branches.len() {
            return Err(Error::Dimension("need one branch per outcome value".into()));
        }
        for i in 0..outcome_values.len() {
            for j in 0..i {
                if (outcome_values[i] - outcome_values[j]).abs() <= CLUSTER_TOL {
                    return Err(Error::InvalidState(format!(
                        "outcome values {} and {} are not distinct",
                        outcome_values[j], outcome_values[i]
                    )));
                }
            }
        }
        for (n, b) in branches.iter().enumerate() {
            if b.dim() != dim {
                return Err(Error::Dimension(format!(
                    "branch {n} acts on dimension {} instead of {dim}",
                    b.dim()
                )));
            }
            let min = b.min_choi_eigenvalue().map_err(|_| {
                Error::InvalidState(format!("branch {n} is not Hermiticity-preserving"))
            })?;
            if min < -TOL {
                return Err(Error::InvalidState(format!(
                    "branch {n} is not completely positive (Choi eigenvalue {min})"
                )));
            }
        }
        let mut inst = Self {
            dim,
            outcome_values,
            branches,
            observable: None,
        };
        let resid = inst.total().trace_preservation_residual();
        if resid > TOL {
            return Err(Error::InvalidState(format!(
                "total operation is not trace-preserving (residual {resid})"
            )));
        }
        inst.observable = inst.infer_observable();
        Ok(inst)
    }

    /// Skips all invariant checks. Intended for constructing deliberately
    /// broken branch families to exercise the audit.
    pub fn new_unchecked(
        dim: usize,
        outcome_values: Vec<f64>,
        branches: Vec<Superoperator>,
    ) -> Self {
        Self {
            dim,
            outcome_values,
            branches,
            observable: None,
        }
    }

    /// Lüders instrument of an observable: branch n maps ρ ↦ PₙρPₙ.
    pub fn luders(obs: &DiscreteObservable) -> Self {
        let branches = obs
            .projections()
            .iter()
            .map(|p| Superoperator::conjugation(p).expect("projection is square"))
            .collect();
        Self {
            dim: obs.dim(),
            outcome_values: obs.values().to_vec(),
            branches,
            observable: Some(obs.clone()),
        }
    }

    /// Repeatable measurement of a refined nondegenerate observable whose
    /// outcomes are coarse-grained back to `obs`: branch n maps
    /// ρ ↦ Σ_m ⟨φ_{n,m}|ρ|φ_{n,m}⟩·|φ_{n,m}⟩⟨φ_{n,m}| over the refinement
    /// vectors lying in the range of projection n.
    pub fn von_neumann(obs: &DiscreteObservable, refinement: &[StateVector]) -> Result<Self> {
        let d = obs.dim();
        if refinement.len() != d {
            return Err(Error::Refinement(format!(
                "refinement has {} vectors, dimension is {d}",
                refinement.len()
            )));
        }
        for v in refinement {
            if v.dim() != d {
                return Err(Error::Refinement(
                    "refinement vector dimension mismatch".into(),
                ));
            }
        }
        for i in 0..d {
            for j in 0..i {
                if refinement[i].inner(&refinement[j]).norm() > TOL {
                    return Err(Error::Refinement(format!(
                        "refinement vectors {j} and {i} are not orthogonal"
                    )));
                }
            }
        }
        // each refinement vector must lie in the range of exactly one projection
        let mut assignment: Vec<Vec<usize>> = vec![Vec::new(); obs.num_outcomes()];
        for (m, v) in refinement.iter().enumerate() {
            let amps = v.amplitudes().to_vec();
            let col = CMatrix::new(d, 1, amps.clone())?;
            let mut home = None;
            for (n, p) in obs.projections().iter().enumerate() {
                let pv = p.matmul(&col);
                if pv.approx_eq(&col, 1e-8) {
                    home = Some(n);
                    break;
                }
            }
            match home {
                Some(n) => assignment[n].push(m),
                None => {
                    return Err(Error::Refinement(format!(
                        "vector {m} does not lie in any eigenspace of the observable"
                    )))
                }
            }
        }
        let branches = assignment
            .iter()
            .map(|ms| {
                Superoperator::from_map(d, |rho| {
                    let mut out = CMatrix::zeros(d, d);
                    for &m in ms {
                        let proj = refinement[m].projector();
                        let weight = proj.matmul(rho).trace();
                        out = &out + &proj.scale(weight);
                    }
                    out
                })
            })
            .collect();
        Ok(Self {
            dim: d,
            outcome_values: obs.values().to_vec(),
            branches,
            observable: Some(obs.clone()),
        })
    }

    /// Operation-valued measure of an indirect measurement model: branch n
    /// maps ρ ↦ Tr_K[(I⊗E^M{aₙ})U(ρ⊗σ)U†].
    pub fn from_model(model: &IndirectModel) -> Result<Self> {
        let d = model.sys_dim();
        let branches: Vec<Superoperator> = (0..model.probe_observable().num_outcomes())
            .map(|n| {
                Superoperator::from_map(d, |rho| {
                    model
                        .branch_action(n, rho)
                        .expect("matrix-unit dimensions match")
                })
            })
            .collect();
        Self::new(d, model.probe_observable().values().to_vec(), branches)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_outcomes(&self) -> usize {
        self.outcome_values.len()
    }

    pub fn outcome_values(&self) -> &[f64] {
        &self.outcome_values
    }

    pub fn branch(&self, n: usize) -> &Superoperator {
        &self.branches[n]
    }

    pub fn branches(&self) -> &[Superoperator] {
        &self.branches
    }

    /// The measured observable, when one was attached at construction or
    /// inferred from the branch effects.
    pub fn observable(&self) -> Option<&DiscreteObservable> {
        self.observable.as_ref()
    }

    /// Effect of outcome n: X{aₙ}*(I).
    pub fn effect(&self, n: usize) -> CMatrix {
        self.branches[n]
            .dual()
            .apply(&CMatrix::identity(self.dim))
            .expect("dimensions match")
    }

    /// If the effects form orthogonal projections resolving the identity,
    /// the instrument measures the sharp observable they define.
    pub fn infer_observable(&self) -> Option<DiscreteObservable> {
        let effects: Vec<CMatrix> = (0..self.num_outcomes()).map(|n| self.effect(n)).collect();
        DiscreteObservable::new(self.outcome_values.clone(), effects).ok()
    }

    /// X(Δ): sum of the branches selected by the outcome set.
    pub fn operation(&self, set: &OutcomeSet) -> Result<Superoperator> {
        if let Some(max) = set.max_index() {
            if max >= self.num_outcomes() {
                return Err(Error::Outcome(format!(
                    "index {max} out of range for {} outcomes",
                    self.num_outcomes()
                )));
            }
        }
        let mut total = Superoperator::zero(self.dim);
        for n in set.iter() {
            total = total.add(&self.branches[n])?;
        }
        Ok(total)
    }

    /// Nonselective operation T = X(R), the outcome-blind total state change.
    pub fn total(&self) -> Superoperator {
        let mut total = Superoperator::zero(self.dim);
        for b in &self.branches {
            total = total.add(b).expect("equal dimensions");
        }
        total
    }

    /// Residual of A-compatibility: max over outcome values of
    /// ‖X({v})*I − E^A({v})‖, where v ranges over the union of the
    /// instrument's and the observable's outcome values. Additivity extends
    /// singletons to all outcome sets.
    pub fn measures_residual(&self, obs: &DiscreteObservable) -> Result<f64> {
        if obs.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "observable dimension {} does not match instrument dimension {}",
                obs.dim(),
                self.dim
            )));
        }
        let mut values: Vec<f64> = self.outcome_values.clone();
        for &v in obs.values() {
            if !values.iter().any(|&w| (w - v).abs() <= CLUSTER_TOL) {
                values.push(v);
            }
        }
        let zero = CMatrix::zeros(self.dim, self.dim);
        let mut worst = 0.0f64;
        for v in values {
            let mut effect = CMatrix::zeros(self.dim, self.dim);
            for (n, &w) in self.outcome_values.iter().enumerate() {
                if (w - v).abs() <= CLUSTER_TOL {
                    effect = &effect + &self.effect(n);
                }
            }
            let target = obs
                .values()
                .iter()
                .position(|&w| (w - v).abs() <= CLUSTER_TOL)
                .map(|n| obs.projection(n).clone())
                .unwrap_or_else(|| zero.clone());
            worst = worst.max((&effect - &target).op_norm());
        }
        Ok(worst)
    }

    /// A-compatibility: X(Δ)*I = E^A(Δ) for every outcome set.
    pub fn measures(&self, obs: &DiscreteObservable) -> Result<bool> {
        Ok(self.measures_residual(obs)? <= TOL)
    }

    /// Outcome probability and conditional post-measurement state. The
    /// posterior is `None` when the outcome probability vanishes: the
    /// conditional state is undefined and no arbitrary stand-in is invented.
    pub fn apply(
        &self,
        set: &OutcomeSet,
        rho: &DensityOperator,
    ) -> Result<(f64, Option<DensityOperator>)> {
        if rho.dim() != self.dim {
            return Err(Error::Dimension(format!(
                "state dimension {} does not match instrument dimension {}",
                rho.dim(),
                self.dim
            )));
        }
        let op = self.operation(set)?;
        let out = op.apply(rho.matrix())?;
        let p = out.trace().re;
        let p_clamped = p.clamp(0.0, 1.0);
        if p <= TOL {
            return Ok((p_clamped, None));
        }
        let posterior = DensityOperator::new(out.scale_re(1.0 / p))?;
        Ok((p_clamped, Some(posterior)))
    }

    pub fn kraus_branches(&self) -> Result<Vec<Vec<CMatrix>>> {
        self.branches.iter().map(|b| b.kraus()).collect()
    }
}

/// Residuals of the factoring identities of an A-compatible instrument:
/// X(Δ)ρ = X(R)(E^A(Δ)ρ) = X(R)(ρE^A(Δ)) = X(R)(E^A(Δ)ρE^A(Δ)), and the
/// dual-side forms on observables.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FactoringReport {
    pub max_residual: f64,
    pub dual_max_residual: f64,
    pub pass: bool,
}

/// Checks the factoring identities over the matrix-unit basis plus seeded
/// random density operators.
pub fn check_factoring(
    inst: &Instrument,
    obs: &DiscreteObservable,
    samples: usize,
    seed: u64,
) -> Result<FactoringReport> {
    if !inst.measures(obs)? {
        return Err(Error::NotCompatible(format!(
            "compatibility residual {}",
            inst.measures_residual(obs)?
        )));
    }
    let d = inst.dim();
    let total = inst.total();
    let total_dual = total.dual();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_inputs: Vec<CMatrix> = Vec::new();
    for i in 0..d {
        for j in 0..d {
            test_inputs.push(CMatrix::matrix_unit(d, i, j));
        }
    }
    for _ in 0..samples {
        test_inputs.push(crate::sample::random_density(d, &mut rng).matrix().clone());
    }

    let mut worst = 0.0f64;
    for n in 0..inst.num_outcomes() {
        // match the instrument outcome to the observable's projection by value
        let proj = obs
            .values()
            .iter()
            .position(|&w| (w - inst.outcome_values()[n]).abs() <= CLUSTER_TOL)
            .map(|k| obs.projection(k).clone())
            .unwrap_or_else(|| CMatrix::zeros(d, d));
        for rho in &test_inputs {
            let direct = inst.branch(n).apply(rho)?;
            let left = total.apply(&proj.matmul(rho))?;
            let right = total.apply(&rho.matmul(&proj))?;
            let both = total.apply(&proj.matmul(rho).matmul(&proj))?;
            worst = worst.max((&direct - &left).op_norm());
            worst = worst.max((&direct - &right).op_norm());
            worst = worst.max((&direct - &both).op_norm());
        }
    }

    let mut dual_worst = 0.0f64;
    for n in 0..inst.num_outcomes() {
        let proj = obs
            .values()
            .iter()
            .position(|&w| (w - inst.outcome_values()[n]).abs() <= CLUSTER_TOL)
            .map(|k| obs.projection(k).clone())
            .unwrap_or_else(|| CMatrix::zeros(d, d));
        let branch_dual = inst.branch(n).dual();
        for i in 0..d {
            for j in 0..d {
                let b = CMatrix::matrix_unit(d, i, j);
                let direct = branch_dual.apply(&b)?;
                let tb = total_dual.apply(&b)?;
                dual_worst = dual_worst.max((&direct - &tb.matmul(&proj)).op_norm());
                dual_worst = dual_worst.max((&direct - &proj.matmul(&tb)).op_norm());
                dual_worst = dual_worst.max((&direct - &proj.matmul(&tb).matmul(&proj)).op_norm());
            }
        }
    }

    Ok(FactoringReport {
        max_residual: worst,
        dual_max_residual: dual_worst,
        pass: worst <= TOL && dual_worst <= TOL,
    })
}

/// Per-axiom residuals from auditing an instrument against the
/// operation-valued-measure postulates.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DlAuditReport {
    /// Additivity over disjoint outcome subsets.
    pub additivity_residual: f64,
    /// Trace preservation of the total operation.
    pub trace_residual: f64,
    /// Positivity of each branch on sampled states.
    pub positivity_residual: f64,
    /// Complete positivity of each branch (Choi spectrum).
    pub complete_positivity_residual: f64,
    /// Affinity on sampled mixtures.
    pub affinity_residual: f64,
    pub pass: bool,
}

impl DlAuditReport {
    pub fn max_residual(&self) -> f64 {
        self.additivity_residual
            .max(self.trace_residual)
            .max(self.positivity_residual)
            .max(self.complete_positivity_residual)
            .max(self.affinity_residual)
    }
}

/// Audits additivity, trace preservation, branch positivity, complete
/// positivity, and affinity on deterministic seeded samples.
pub fn audit_davies_lewis(inst: &Instrument, samples: usize, seed: u64) -> DlAuditReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = inst.dim();
    let n_out = inst.num_outcomes();

    let mut additivity = 0.0f64;
    let mut positivity = 0.0f64;
    let mut affinity = 0.0f64;

    for _ in 0..samples.max(1) {
        let rho = crate::sample::random_density(d, &mut rng);

        // split the outcome indices into two random disjoint subsets
        let mut left = Vec::new();
        let mut right = Vec::new();
        for n in 0..n_out {
            if rng.gen_bool(0.5) {
                left.push(n);
            } else {
                right.push(n);
            }
        }
        let union = OutcomeSet::new(left.iter().chain(right.iter()).copied());
        let ol = inst
            .operation(&OutcomeSet::new(left.clone()))
            .expect("valid indices");
        let or = inst
            .operation(&OutcomeSet::new(right.clone()))
            .expect("valid indices");
        let ou = inst.operation(&union).expect("valid indices");
        let lhs = ou.apply(rho.matrix()).expect("dimensions match");
        let rhs = &ol.apply(rho.matrix()).expect("dimensions match")
            + &or.apply(rho.matrix()).expect("dimensions match");
        additivity = additivity.max((&lhs - &rhs).op_norm());

        // positivity of each branch output on this state
        for n in 0..n_out {
            let out = inst
                .branch(n)
                .apply(rho.matrix())
                .expect("dimensions match");
            let herm_resid = (&out - &out.dagger()).op_norm();
            positivity = positivity.max(herm_resid);
            let sym = (&out + &out.dagger()).scale_re(0.5);
            if let Ok(eig) = hermitian_eigensystem(&sym) {
                let min = eig.values.last().copied().unwrap_or(0.0);
                positivity = positivity.max((-min).max(0.0));
            }
        }

        // affinity on a random mixture
        let rho2 = crate::sample::random_density(d, &mut rng);
        let alpha: f64 = rng.gen_range(0.05..0.95);
        let mixed = DensityOperator::mix(alpha, &rho, &rho2).expect("valid mixture");
        for n in 0..n_out {
            let whole = inst
                .branch(n)
                .apply(mixed.matrix())
                .expect("dimensions match");
            let parts = &inst
                .branch(n)
                .apply(rho.matrix())
                .expect("dimensions match")
                .scale_re(alpha)
                + &inst
                    .branch(n)
                    .apply(rho2.matrix())
                    .expect("dimensions match")
                    .scale_re(1.0 - alpha);
            affinity = affinity.max((&whole - &parts).op_norm());
        }
    }

    let trace_residual = inst.total().trace_preservation_residual();
    let cp = (0..n_out)
        .map(|n| match inst.branch(n).min_choi_eigenvalue() {
            Ok(min) => (-min).max(0.0),
            Err(_) => f64::INFINITY,
        })
        .fold(0.0f64, f64::max);

    let report = DlAuditReport {
        additivity_residual: additivity,
        trace_residual,
        positivity_residual: positivity,
        complete_positivity_residual: cp,
        affinity_residual: affinity,
        pass: false,
    };
    let pass = report.max_residual() <= TOL;
    DlAuditReport { pass, ..report }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, pauli_x, pauli_z};
    use crate::models;
    use crate::sample;

    fn z_obs() -> DiscreteObservable {
        DiscreteObservable::from_hermitian(&pauli_z()).unwrap()
    }

    fn plus_state() -> DensityOperator {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::new(vec![c64(s, 0.0), c64(s, 0.0)])
            .unwrap()
            .to_density()
    }

    #[test]
    fn sandwich_representation() {
        let a = CMatrix::new(
            2,
            2,
            vec![c64(1.0, 1.0), c64(0.0, 0.0), c64(2.0, 0.0), c64(0.0, -1.0)],
        )
        .unwrap();
        let b = CMatrix::new(
            2,
            2,
            vec![c64(0.5, 0.0), c64(1.0, 0.0), c64(0.0, 1.0), c64(0.0, 0.0)],
        )
        .unwrap();
        let s = Superoperator::sandwich(&a, &b).unwrap();
        let rho = CMatrix::new(
            2,
            2,
            vec![c64(0.3, 0.1), c64(0.0, 0.2), c64(1.0, 0.0), c64(0.5, 0.0)],
        )
        .unwrap();
        let direct = a.matmul(&rho).matmul(&b);
        assert!(s.apply(&rho).unwrap().approx_eq(&direct, 1e-12));
    }

    #[test]
    fn dual_of_identity_is_identity() {
        let id = Superoperator::identity(3);
        assert!(id.dual().rep().approx_eq(id.rep(), 0.0));
    }

    #[test]
    fn dual_of_conjugation_reverses_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = sample::random_matrix(3, &mut rng);
        let s = Superoperator::conjugation(&a).unwrap();
        let dual = s.dual();
        // dual of ρ↦AρA† is X↦A†XA, via the trace pairing on a full basis
        for i in 0..3 {
            for j in 0..3 {
                let x = CMatrix::matrix_unit(3, i, j);
                let direct = dual.apply(&x).unwrap();
                let expect = a.dagger().matmul(&x).matmul(&a);
                assert!(direct.approx_eq(&expect, 1e-10));
            }
        }
    }

    #[test]
    fn duality_pairing_holds_on_operator_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = sample::random_model(3, 2, &mut rng);
        let t = model.nonselective();
        let td = t.dual();
        for i in 0..3 {
            for j in 0..3 {
                let x = CMatrix::matrix_unit(3, i, j);
                for k in 0..3 {
                    for l in 0..3 {
                        let rho = CMatrix::matrix_unit(3, k, l);
                        let lhs = td.apply(&x).unwrap().matmul(&rho).trace();
                        let rhs = x.matmul(&t.apply(&rho).unwrap()).trace();
                        assert!((lhs - rhs).norm() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn model_dual_matches_partial_trace_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = sample::random_model(2, 3, &mut rng);
        let via_rep = model.nonselective().dual();
        let via_formula = model.dual_nonselective_direct();
        assert!(via_rep.rep().approx_eq(via_formula.rep(), 1e-10));
    }

    #[test]
    fn dual_of_counter_total_is_vacuum_expectation() {
        // T*X = ⟨0|X|0⟩·I for the absorbing counter
        let model = models::photon_counter_model(3).unwrap();
        let dual = Instrument::from_model(&model).unwrap().total().dual();
        for i in 0..3 {
            for j in 0..3 {
                let x = CMatrix::matrix_unit(3, i, j);
                let expect = CMatrix::identity(3).scale(x.get(0, 0));
                assert!(dual.apply(&x).unwrap().approx_eq(&expect, 1e-10));
            }
        }
    }

    #[test]
    fn trivial_model_scales_identity() {
        // U = I: branch n is ρ ↦ Tr[E^M{n}σ]·ρ
        let probe_obs = DiscreteObservable::from_hermitian(&pauli_z()).unwrap();
        let sigma = DensityOperator::new(CMatrix::diag_real(&[0.7, 0.3])).unwrap();
        let model = models::trivial_model(3, &sigma, &probe_obs).unwrap();
        let inst = Instrument::from_model(&model).unwrap();
        let rho = DensityOperator::maximally_mixed(3);
        let out0 = inst.branch(0).apply(rho.matrix()).unwrap();
        assert!(out0.approx_eq(&rho.matrix().scale_re(0.7), 1e-10));
        let out1 = inst.branch(1).apply(rho.matrix()).unwrap();
        assert!(out1.approx_eq(&rho.matrix().scale_re(0.3), 1e-10));
    }

    #[test]
    fn photon_counter_closed_form() {
        // the counter absorbs everything: X{n}ρ = ⟨n|ρ|n⟩·|0⟩⟨0|
        let d = 3;
        let model = models::photon_counter_model(d).unwrap();
        let inst = Instrument::from_model(&model).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..4 {
            let rho = sample::random_density(d, &mut rng);
            for n in 0..d {
                let got = inst.branch(n).apply(rho.matrix()).unwrap();
                let want = CMatrix::matrix_unit(d, 0, 0).scale(rho.matrix().get(n, n));
                assert!(got.approx_eq(&want, 1e-10));
            }
        }
    }

    #[test]
    fn repeatable_model_yields_luders_branches_at_zero_phase() {
        for d in [2usize, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(d as u64);
            let obs = sample::random_nondegenerate_observable(d, &mut rng);
            let model = models::repeatable_model(&obs, None).unwrap();
            let inst = Instrument::from_model(&model).unwrap();
            let luders = Instrument::luders(&obs);
            for n in 0..d {
                assert!(inst.branch(n).rep().approx_eq(luders.branch(n).rep(), 1e-9));
            }
        }
    }

    #[test]
    fn repeatable_model_is_phase_invariant() {
        let obs = z_obs();
        let base = Instrument::from_model(&models::repeatable_model(&obs, None).unwrap()).unwrap();
        let phased =
            Instrument::from_model(&models::repeatable_model(&obs, Some(&[0.3, -1.2])).unwrap())
                .unwrap();
        for n in 0..2 {
            assert!(base
                .branch(n)
                .rep()
                .approx_eq(phased.branch(n).rep(), 1e-10));
        }
    }

    #[test]
    fn luders_identity_preserves_state() {
        let obs = DiscreteObservable::identity(2);
        let inst = Instrument::luders(&obs);
        let rho = plus_state();
        let (p, post) = inst.apply(&OutcomeSet::singleton(0), &rho).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        assert!(post.unwrap().matrix().approx_eq(rho.matrix(), 1e-12));
    }

    #[test]
    fn luders_z_on_plus() {
        let inst = Instrument::luders(&z_obs());
        let (p, post) = inst
            .apply(&OutcomeSet::singleton(0), &plus_state())
            .unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        let expect = CMatrix::diag_real(&[1.0, 0.0]);
        assert!(post.unwrap().matrix().approx_eq(&expect, 1e-12));
    }

    #[test]
    fn luders_zero_probability_branch_is_undefined() {
        let inst = Instrument::luders(&z_obs());
        let down = StateVector::basis(2, 1).to_density();
        let (p, post) = inst.apply(&OutcomeSet::singleton(0), &down).unwrap();
        assert!(p.abs() < 1e-12);
        assert!(post.is_none());
    }

    #[test]
    fn apply_on_full_outcome_set_gives_nonselective_posterior() {
        let inst = Instrument::luders(&z_obs());
        let (p, post) = inst.apply(&OutcomeSet::all(2), &plus_state()).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        // the unconditional posterior is the dephased input
        assert!(post
            .unwrap()
            .matrix()
            .approx_eq(&CMatrix::diag_real(&[0.5, 0.5]), 1e-12));
    }

    #[test]
    fn luders_degenerate_renormalizes_block() {
        let obs =
            DiscreteObservable::from_hermitian(&CMatrix::diag_real(&[1.0, 1.0, 2.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = sample::random_density(3, &mut rng);
        // outcome with value 1 is the rank-2 block
        let n1 = obs
            .values()
            .iter()
            .position(|&v| (v - 1.0).abs() < 1e-9)
            .unwrap();
        let inst = Instrument::luders(&obs);
        let (p, post) = inst.apply(&OutcomeSet::singleton(n1), &rho).unwrap();
        let proj = obs.projection(n1);
        let sandwiched = proj.matmul(rho.matrix()).matmul(proj);
        let tr = sandwiched.trace().re;
        assert!((p - tr).abs() < 1e-10);
        assert!(post
            .unwrap()
            .matrix()
            .approx_eq(&sandwiched.scale_re(1.0 / tr), 1e-10));
    }

    #[test]
    fn photon_counter_apply_superposition() {
        let model = models::photon_counter_model(3).unwrap();
        let inst = Instrument::from_model(&model).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = StateVector::new(vec![c64(s, 0.0), c64(0.0, 0.0), c64(s, 0.0)]).unwrap();
        let (p, post) = inst
            .apply(&OutcomeSet::singleton(2), &psi.to_density())
            .unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        let vacuum = CMatrix::matrix_unit(3, 0, 0);
        assert!(post.unwrap().matrix().approx_eq(&vacuum, 1e-10));
    }

    #[test]
    fn von_neumann_trivial_refinement_matches_luders() {
        let obs = z_obs();
        let basis = vec![StateVector::basis(2, 0), StateVector::basis(2, 1)];
        let vn = Instrument::von_neumann(&obs, &basis).unwrap();
        let luders = Instrument::luders(&obs);
        for n in 0..2 {
            assert!(vn.branch(n).rep().approx_eq(luders.branch(n).rep(), 1e-12));
        }
    }

    #[test]
    fn von_neumann_identity_with_rotated_refinement_changes_state() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::new(vec![c64(s, 0.0), c64(s, 0.0)]).unwrap();
        let minus = StateVector::new(vec![c64(s, 0.0), c64(-s, 0.0)]).unwrap();
        let inst =
            Instrument::von_neumann(&DiscreteObservable::identity(2), &[plus, minus]).unwrap();
        let zero = StateVector::basis(2, 0).to_density();
        let (p, post) = inst.apply(&OutcomeSet::singleton(0), &zero).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
        // |0⟩⟨0| becomes (|+⟩⟨+| + |−⟩⟨−|)/2 = I/2
        assert!(post
            .unwrap()
            .matrix()
            .approx_eq(&CMatrix::identity(2).scale_re(0.5), 1e-10));
    }

    #[test]
    fn von_neumann_rejects_incompatible_refinement() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::new(vec![c64(s, 0.0), c64(s, 0.0)]).unwrap();
        let minus = StateVector::new(vec![c64(s, 0.0), c64(-s, 0.0)]).unwrap();
        let err = Instrument::von_neumann(&z_obs(), &[plus, minus]);
        assert!(matches!(err, Err(Error::Refinement(_))));
    }

    #[test]
    fn nonselective_of_luders_z_removes_coherences() {
        let inst = Instrument::luders(&z_obs());
        let rho = plus_state();
        let out = inst.total().apply(rho.matrix()).unwrap();
        assert!(out.approx_eq(&CMatrix::diag_real(&[0.5, 0.5]), 1e-12));
    }

    #[test]
    fn measures_and_effects() {
        let z = z_obs();
        let x = DiscreteObservable::from_hermitian(&pauli_x()).unwrap();
        let luders_z = Instrument::luders(&z);
        assert!(luders_z.measures(&z).unwrap());
        assert!(!luders_z.measures(&x).unwrap());

        let counter = Instrument::from_model(&models::photon_counter_model(3).unwrap()).unwrap();
        let number = DiscreteObservable::number(3);
        assert!(counter.measures(&number).unwrap());
        for n in 0..3 {
            assert!(counter
                .effect(n)
                .approx_eq(&CMatrix::matrix_unit(3, n, n), 1e-10));
        }
    }

    #[test]
    fn inferred_observable_from_model() {
        let counter = Instrument::from_model(&models::photon_counter_model(3).unwrap()).unwrap();
        let inferred = counter.observable().expect("counter measures sharply");
        let number = DiscreteObservable::number(3);
        for n in 0..3 {
            assert!((inferred.value(n) - number.value(n)).abs() < 1e-12);
            assert!(inferred
                .projection(n)
                .approx_eq(number.projection(n), 1e-10));
        }
    }

    #[test]
    fn factoring_for_luders_and_counter() {
        let z = z_obs();
        let report = check_factoring(&Instrument::luders(&z), &z, 4, 1).unwrap();
        assert!(report.pass, "max residual {}", report.max_residual);

        let counter = Instrument::from_model(&models::photon_counter_model(3).unwrap()).unwrap();
        let number = DiscreteObservable::number(3);
        let report = check_factoring(&counter, &number, 4, 2).unwrap();
        assert!(report.pass, "max residual {}", report.max_residual);
    }

    #[test]
    fn factoring_requires_compatibility() {
        let z = z_obs();
        let x = DiscreteObservable::from_hermitian(&pauli_x()).unwrap();
        let err = check_factoring(&Instrument::luders(&z), &x, 2, 1);
        assert!(matches!(err, Err(Error::NotCompatible(_))));
    }

    #[test]
    fn factoring_for_random_measuring_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let obs = sample::random_nondegenerate_observable(3, &mut rng);
        let model = models::random_measuring_model(&obs, 1, &mut rng).unwrap();
        let inst = Instrument::from_model(&model).unwrap();
        let report = check_factoring(&inst, &obs, 4, 3).unwrap();
        assert!(report.pass, "max residual {}", report.max_residual);
    }

    #[test]
    fn audit_passes_for_luders() {
        let report = audit_davies_lewis(&Instrument::luders(&z_obs()), 8, 42);
        assert!(report.pass, "residuals {report:?}");
    }

    #[test]
    fn audit_passes_for_model_instruments() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let model = sample::random_model(3, 3, &mut rng);
        let inst = Instrument::from_model(&model).unwrap();
        let report = audit_davies_lewis(&inst, 8, 42);
        assert!(report.pass, "residuals {report:?}");
    }

    #[test]
    fn audit_flags_trace_violation() {
        // one Lüders branch dropped: total no longer trace-preserving
        let z = z_obs();
        let branch = Superoperator::conjugation(z.projection(0)).unwrap();
        let broken = Instrument::new_unchecked(2, vec![1.0], vec![branch]);
        let report = audit_davies_lewis(&broken, 4, 1);
        assert!(!report.pass);
        assert!(report.trace_residual > 0.5);
    }

    #[test]
    fn kraus_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let model = sample::random_model(3, 2, &mut rng);
        let inst = Instrument::from_model(&model).unwrap();
        for n in 0..inst.num_outcomes() {
            let kraus = inst.branch(n).kraus().unwrap();
            let rebuilt = Superoperator::from_kraus(3, &kraus).unwrap();
            assert!(rebuilt.rep().approx_eq(inst.branch(n).rep(), 1e-9));
        }
    }

    #[test]
    fn conditional_states_match_model_formula() {
        // posterior from apply() equals the direct partial-trace expression
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let model = sample::random_model(3, 2, &mut rng);
        let inst = Instrument::from_model(&model).unwrap();
        let rho = sample::random_density(3, &mut rng);
        for n in 0..inst.num_outcomes() {
            let direct = model.branch_action(n, rho.matrix()).unwrap();
            let p_direct = direct.trace().re;
            let (p, post) = inst.apply(&OutcomeSet::singleton(n), &rho).unwrap();
            assert!((p - p_direct).abs() < 1e-10);
            if let Some(post) = post {
                assert!(post
                    .matrix()
                    .approx_eq(&direct.scale_re(1.0 / p_direct), 1e-9));
            }
        }
    }

    #[test]
    fn conditional_state_four_expressions_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let obs = sample::random_nondegenerate_observable(3, &mut rng);
        let model = models::random_measuring_model(&obs, 2, &mut rng).unwrap();
        let rho = sample::random_density(3, &mut rng);
        let split = model.split();
        let u = model.interaction();
        let sigma = model.probe_state().matrix();

        for n in 0..obs.num_outcomes() {
            let proj = obs.projection(n);
            let p = proj.matmul(rho.matrix()).trace().re;
            if p < 1e-6 {
                continue;
            }
            let forms = [
                model.branch_action(n, rho.matrix()).unwrap(),
                {
                    let sel = rho.matrix().matmul(proj).kron(sigma);
                    split
                        .partial_trace(&u.matmul(&sel).matmul(&u.dagger()), 0)
                        .unwrap()
                },
                {
                    let sel = proj.matmul(rho.matrix()).kron(sigma);
                    split
                        .partial_trace(&u.matmul(&sel).matmul(&u.dagger()), 0)
                        .unwrap()
                },
                {
                    let sel = proj.matmul(rho.matrix()).matmul(proj).kron(sigma);
                    split
                        .partial_trace(&u.matmul(&sel).matmul(&u.dagger()), 0)
                        .unwrap()
                },
            ];
            for f in &forms[1..] {
                assert!(
                    (&forms[0] - f).op_norm() < 1e-9,
                    "conditional-state expressions disagree"
                );
            }
        }
    }
}
