//! Successive-measurement statistics: joint distributions, the disturbance
//! predicate, simultaneity decisions, locality of bipartite apparatuses, and
//! correlation statistics of entangled pairs.

use crate::error::{Error, Result};
use crate::instruments::{IndirectModel, Instrument};
use crate::linalg::{commutator, CMatrix, DimSplit, TOL};
use crate::observables::{DensityOperator, DiscreteObservable, StateVector};

/// Joint probability table of two successive measurements. Rows follow the
/// first measurement's outcomes, columns the second's.
#[derive(Debug, Clone, serde::Serialize)]
pub struct JointDistribution {
    pub outcomes_a: Vec<f64>,
    pub outcomes_b: Vec<f64>,
    pub table: Vec<Vec<f64>>,
}

impl JointDistribution {
    pub fn new(outcomes_a: Vec<f64>, outcomes_b: Vec<f64>, raw: Vec<Vec<f64>>) -> Result<Self> {
        if raw.len() != outcomes_a.len() || raw.iter().any(|r| r.len() != outcomes_b.len()) {
            return Err(Error::Dimension("joint table shape mismatch".into()));
        }
        let mut total = 0.0;
        let mut table = Vec::with_capacity(raw.len());
        for row in raw {
            let mut out = Vec::with_capacity(row.len());
            for p in row {
                if !(-TOL..=1.0 + TOL).contains(&p) {
                    return Err(Error::InvalidState(format!(
                        "joint probability {p} out of range"
                    )));
                }
                let clamped = p.clamp(0.0, 1.0);
                total += clamped;
                out.push(clamped);
            }
            table.push(out);
        }
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidState(format!(
                "joint probabilities sum to {total}"
            )));
        }
        Ok(Self {
            outcomes_a,
            outcomes_b,
            table,
        })
    }

    pub fn prob(&self, n: usize, m: usize) -> f64 {
        self.table[n][m]
    }

    pub fn marginal_a(&self) -> Vec<f64> {
        self.table.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn marginal_b(&self) -> Vec<f64> {
        (0..self.outcomes_b.len())
            .map(|m| self.table.iter().map(|row| row[m]).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for (r1, r2) in self.table.iter().zip(other.table.iter()) {
            for (a, b) in r1.iter().zip(r2.iter()) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

/// A joint table together with the residual between its two computation
/// routes (direct branch statistics vs. the dual-operation formula).
#[derive(Debug, Clone, serde::Serialize)]
pub struct JointResult {
    pub distribution: JointDistribution,
    pub dual_route_residual: f64,
}

fn measured_observable(inst: &Instrument) -> Result<DiscreteObservable> {
    inst.observable().cloned().ok_or_else(|| {
        Error::NotCompatible("instrument does not measure a sharp observable".into())
    })
}

/// Joint statistics of measuring with the instrument first and an arbitrary
/// apparatus for `obs_b` immediately after: `table[n][m]` = Tr[E^B{b_m}·X{aₙ}ρ].
/// The same table is recomputed through the dual of the nonselective
/// operation and the worst discrepancy between the two routes is reported.
pub fn successive_joint(
    inst: &Instrument,
    obs_b: &DiscreteObservable,
    rho: &DensityOperator,
) -> Result<JointResult> {
    let obs_a = measured_observable(inst)?;
    if obs_b.dim() != inst.dim() || rho.dim() != inst.dim() {
        return Err(Error::Dimension(
            "instrument, second observable, and state dimensions must agree".into(),
        ));
    }
    let total_dual = inst.total().dual();
    let mut table = Vec::with_capacity(inst.num_outcomes());
    let mut route_residual = 0.0f64;
    for n in 0..inst.num_outcomes() {
        let branch_out = inst.branch(n).apply(rho.matrix())?;
        let mut row = Vec::with_capacity(obs_b.num_outcomes());
        for m in 0..obs_b.num_outcomes() {
            let direct = obs_b.projection(m).matmul(&branch_out).trace().re;
            let heisenberg = obs_a
                .projection(n)
                .matmul(&total_dual.apply(obs_b.projection(m))?)
                .matmul(rho.matrix())
                .trace()
                .re;
            route_residual = route_residual.max((direct - heisenberg).abs());
            row.push(direct);
        }
        table.push(row);
    }
    let distribution =
        JointDistribution::new(obs_a.values().to_vec(), obs_b.values().to_vec(), table)?;
    Ok(JointResult {
        distribution,
        dual_route_residual: route_residual,
    })
}

/// Whether the apparatus perturbs the statistics of `obs_b`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DisturbanceReport {
    pub disturbed: bool,
    pub residual: f64,
    /// Singleton outcome set of `obs_b` realizing the worst residual.
    pub worst_outcome: usize,
}

/// Decides disturbance: the nonselective dual must leave every spectral
/// projection of `obs_b` fixed. With an evolution unitary V the comparison
/// target becomes V†·E^B(Δ)·V, so that nondisturbance means agreement with
/// the freely evolved statistics. Checked on singleton outcome sets;
/// additivity extends the decision to all outcome sets.
pub fn disturbs(
    inst: &Instrument,
    obs_b: &DiscreteObservable,
    evolution: Option<&CMatrix>,
) -> Result<DisturbanceReport> {
    if obs_b.dim() != inst.dim() {
        return Err(Error::Dimension(
            "observable dimension does not match instrument dimension".into(),
        ));
    }
    if let Some(v) = evolution {
        if v.rows() != inst.dim() || !v.is_square() {
            return Err(Error::Dimension("evolution dimension mismatch".into()));
        }
        if !v.is_unitary(TOL) {
            return Err(Error::Model("evolution matrix must be unitary".into()));
        }
    }
    let total_dual = inst.total().dual();
    let mut residual = 0.0f64;
    let mut worst = 0;
    for m in 0..obs_b.num_outcomes() {
        let proj = obs_b.projection(m);
        let moved = total_dual.apply(proj)?;
        let target = match evolution {
            None => proj.clone(),
            Some(v) => v.dagger().matmul(proj).matmul(v),
        };
        let r = (&moved - &target).op_norm();
        if r > residual {
            residual = r;
            worst = m;
        }
    }
    Ok(DisturbanceReport {
        disturbed: residual > TOL,
        residual,
        worst_outcome: worst,
    })
}

/// Simultaneity decision together with its disturbance counterpart; the two
/// verdicts must be opposite and any mismatch is flagged.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SimultaneityReport {
    pub simultaneous: bool,
    /// Worst deviation of the successive joint statistics from the
    /// simultaneous-measurement formula, over all outcome pairs and states.
    pub residual: f64,
    /// Outcome pair (first, second) realizing the worst deviation.
    pub worst_pair: (usize, usize),
    pub disturbance: DisturbanceReport,
    pub equivalence_holds: bool,
}

/// Decides whether the successive measurement is a simultaneous measurement:
/// the joint table must equal Tr[E^A(Δ)E^B(Δ′)ρ] for every pair of outcome
/// sets and every input state. Linearity reduces the quantification over
/// states to an operator identity per outcome pair. The disturbance verdict
/// is computed independently and compared.
pub fn is_simultaneous(
    inst: &Instrument,
    obs_b: &DiscreteObservable,
) -> Result<SimultaneityReport> {
    let obs_a = measured_observable(inst)?;
    if obs_b.dim() != inst.dim() {
        return Err(Error::Dimension(
            "observable dimension does not match instrument dimension".into(),
        ));
    }
    let mut residual = 0.0f64;
    let mut worst_pair = (0, 0);
    for n in 0..inst.num_outcomes() {
        let branch_dual = inst.branch(n).dual();
        for m in 0..obs_b.num_outcomes() {
            let lhs = branch_dual.apply(obs_b.projection(m))?;
            let rhs = obs_a.projection(n).matmul(obs_b.projection(m));
            let r = (&lhs - &rhs).op_norm();
            if r > residual {
                residual = r;
                worst_pair = (n, m);
            }
        }
    }
    let disturbance = disturbs(inst, obs_b, None)?;
    let simultaneous = residual <= TOL;
    Ok(SimultaneityReport {
        simultaneous,
        residual,
        worst_pair,
        equivalence_holds: simultaneous == !disturbance.disturbed,
        disturbance,
    })
}

/// Commutator criterion for pure-probe models, with the disturbance verdict
/// computed independently for comparison.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CommutatorReport {
    pub nondisturbing: bool,
    /// Worst norm of [U, E^B(Δ)⊗I]|ψ⊗Φ⟩ over singleton Δ and basis ψ.
    pub residual: f64,
    /// Outcome of `obs_b` realizing the worst commutator action.
    pub worst_outcome: usize,
    pub disturbance: DisturbanceReport,
    pub equivalence_holds: bool,
}

/// For a model with pure probe state Φ, the apparatus leaves `obs_b`
/// undisturbed exactly when [U, E^B(Δ)⊗I] annihilates every ψ⊗Φ. Linearity
/// reduces the quantification over ψ to the standard basis.
pub fn commutator_criterion(
    model: &IndirectModel,
    obs_b: &DiscreteObservable,
) -> Result<CommutatorReport> {
    if obs_b.dim() != model.sys_dim() {
        return Err(Error::Dimension(
            "observable dimension does not match system dimension".into(),
        ));
    }
    let probe_vec = model.pure_probe_vector()?;
    let ik = CMatrix::identity(model.probe_dim());
    let mut residual = 0.0f64;
    let mut worst_outcome = 0;
    for m in 0..obs_b.num_outcomes() {
        let comm = commutator(model.interaction(), &obs_b.projection(m).kron(&ik));
        for i in 0..model.sys_dim() {
            let psi = StateVector::basis(model.sys_dim(), i).tensor(&probe_vec);
            let moved = comm.matvec(psi.amplitudes());
            let norm = moved.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm > residual {
                residual = norm;
                worst_outcome = m;
            }
        }
    }
    let disturbance = disturbs(&Instrument::from_model(model)?, obs_b, None)?;
    let nondisturbing = residual <= TOL;
    Ok(CommutatorReport {
        nondisturbing,
        residual,
        worst_outcome,
        equivalence_holds: nondisturbing == !disturbance.disturbed,
        disturbance,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LocalityReport {
    pub local: bool,
    pub residual: f64,
}

/// Locality of the measuring interaction in one subsystem of a bipartite
/// system (ordering S₁⊗S₂⊗probe): the interaction must commute with every
/// operator of the untouched subsystem. Matrix units span those operators.
pub fn is_local(model: &IndirectModel, split: &DimSplit, which: usize) -> Result<LocalityReport> {
    if split.dims().len() != 2 {
        return Err(Error::Dimension("locality needs a two-factor split".into()));
    }
    if split.total() != model.sys_dim() {
        return Err(Error::Dimension(format!(
            "split total {} does not match system dimension {}",
            split.total(),
            model.sys_dim()
        )));
    }
    if which > 1 {
        return Err(Error::Dimension("subsystem index must be 0 or 1".into()));
    }
    let (d1, d2) = (split.factor(0), split.factor(1));
    let other = 1 - which;
    let other_dim = split.factor(other);
    let ik = CMatrix::identity(model.probe_dim());
    let mut residual = 0.0f64;
    for a in 0..other_dim {
        for b in 0..other_dim {
            let unit = CMatrix::matrix_unit(other_dim, a, b);
            let op = if other == 0 {
                unit.kron(&CMatrix::identity(d2)).kron(&ik)
            } else {
                CMatrix::identity(d1).kron(&unit).kron(&ik)
            };
            residual = residual.max(commutator(model.interaction(), &op).op_norm());
        }
    }
    Ok(LocalityReport {
        local: residual <= TOL,
        residual,
    })
}

/// Joint statistics of local measurements on an entangled pair, compared
/// against the product-projection formula Tr[(E^C(Δ)⊗E^D(Δ′))ρ].
#[derive(Debug, Clone, serde::Serialize)]
pub struct CorrelationReport {
    pub distribution: JointDistribution,
    pub reference: JointDistribution,
    pub max_discrepancy: f64,
    pub pass: bool,
}

/// Runs the first measurement through the model's instrument on S₁ and the
/// second as a sharp observable on S₂, then checks the product formula. The
/// model must be local in S₁ and measure a sharp observable on the pair.
pub fn epr_joint(
    model: &IndirectModel,
    split: &DimSplit,
    obs_d: &DiscreteObservable,
    rho: &DensityOperator,
) -> Result<CorrelationReport> {
    let locality = is_local(model, split, 0)?;
    if !locality.local {
        return Err(Error::NotLocal(format!(
            "commutation residual {}",
            locality.residual
        )));
    }
    if obs_d.dim() != split.factor(1) {
        return Err(Error::Dimension(
            "second observable must live on subsystem 2".into(),
        ));
    }
    let inst = Instrument::from_model(model)?;
    let obs_a = measured_observable(&inst)?;
    let b_embedded = embed_second(obs_d, split.factor(0))?;
    let joint = successive_joint(&inst, &b_embedded, rho)?;

    let mut reference = Vec::with_capacity(obs_a.num_outcomes());
    for n in 0..obs_a.num_outcomes() {
        let mut row = Vec::with_capacity(obs_d.num_outcomes());
        for m in 0..obs_d.num_outcomes() {
            let op = obs_a
                .projection(n)
                .matmul(b_embedded.projection(m))
                .matmul(rho.matrix());
            row.push(op.trace().re);
        }
        reference.push(row);
    }
    let reference =
        JointDistribution::new(obs_a.values().to_vec(), obs_d.values().to_vec(), reference)?;
    let max_discrepancy = joint.distribution.max_abs_diff(&reference);
    Ok(CorrelationReport {
        pass: max_discrepancy <= TOL,
        distribution: joint.distribution,
        reference,
        max_discrepancy,
    })
}

/// I₁ ⊗ E^D as an observable on the bipartite space.
pub fn embed_second(obs_d: &DiscreteObservable, d1: usize) -> Result<DiscreteObservable> {
    let i1 = CMatrix::identity(d1);
    DiscreteObservable::new(
        obs_d.values().to_vec(),
        obs_d.projections().iter().map(|p| i1.kron(p)).collect(),
    )
}

/// State-vector reduction on an entangled pair: expansion coefficients,
/// conditional states, and the amplitude-squared joint table, cross-checked
/// against the projective-instrument route.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReductionReport {
    pub probabilities: Vec<f64>,
    /// Conditional post-measurement state vectors; `None` marks outcomes of
    /// probability zero, whose conditional state is undefined.
    pub conditional_states: Vec<Option<Vec<(f64, f64)>>>,
    pub distribution: JointDistribution,
    /// Worst deviation from the joint table of the projective instrument for
    /// the same pair of measurements.
    pub instrument_agreement: f64,
}

/// Expands Ψ over the first-subsystem basis {φₙ}: Ψ = Σₙ φₙ⊗ηₙ with
/// ηₙ = (⟨φₙ|⊗I)Ψ. The conditional state for outcome n is the normalized
/// φₙ⊗ηₙ, and the joint table entry (n, m) is |⟨φₙ⊗ξ_m|Ψ⟩|².
pub fn epr_reduction(
    psi: &StateVector,
    split: &DimSplit,
    basis_c: &[StateVector],
    obs_d: &DiscreteObservable,
) -> Result<ReductionReport> {
    if split.dims().len() != 2 || split.total() != psi.dim() {
        return Err(Error::Dimension(
            "state dimension must equal the product of the split".into(),
        ));
    }
    let (d1, d2) = (split.factor(0), split.factor(1));
    if basis_c.len() != d1 || basis_c.iter().any(|v| v.dim() != d1) {
        return Err(Error::Dimension(
            "first-subsystem basis must have one vector per dimension".into(),
        ));
    }
    for i in 0..d1 {
        for j in 0..i {
            if basis_c[i].inner(&basis_c[j]).norm() > TOL {
                return Err(Error::InvalidState(
                    "first-subsystem basis is not orthonormal".into(),
                ));
            }
        }
    }
    if obs_d.dim() != d2 {
        return Err(Error::Dimension(
            "second observable must live on subsystem 2".into(),
        ));
    }
    let basis_d = obs_d.eigenbasis().map_err(|_| {
        Error::InvalidObservable("reduction requires a nondegenerate second observable".into())
    })?;

    let amps = psi.amplitudes();
    let mut probabilities = Vec::with_capacity(d1);
    let mut conditionals = Vec::with_capacity(d1);
    let mut table = vec![vec![0.0; obs_d.num_outcomes()]; d1];
    for (n, phi) in basis_c.iter().enumerate() {
        // ηₙ = (⟨φₙ|⊗I)Ψ
        let eta: Vec<crate::linalg::C64> = (0..d2)
            .map(|b| {
                (0..d1)
                    .map(|a| phi.amplitudes()[a].conj() * amps[a * d2 + b])
                    .sum()
            })
            .collect();
        let weight: f64 = eta.iter().map(|x| x.norm_sqr()).sum();
        probabilities.push(weight);
        if weight > TOL {
            let scale = 1.0 / weight.sqrt();
            let joint_state: Vec<(f64, f64)> = phi
                .amplitudes()
                .iter()
                .flat_map(|&a| eta.iter().map(move |&e| a * e * scale))
                .map(|x| (x.re, x.im))
                .collect();
            conditionals.push(Some(joint_state));
        } else {
            conditionals.push(None);
        }
        for (m, xi) in basis_d.iter().enumerate() {
            let amp: crate::linalg::C64 = xi
                .amplitudes()
                .iter()
                .zip(eta.iter())
                .map(|(x, e)| x.conj() * e)
                .sum();
            table[n][m] = amp.norm_sqr();
        }
    }
    let distribution = JointDistribution::new(
        (0..d1).map(|n| n as f64).collect(),
        obs_d.values().to_vec(),
        table,
    )?;

    // cross-check against the projective instrument for the same pair
    let obs_c = DiscreteObservable::new(
        (0..d1).map(|n| n as f64).collect(),
        basis_c.iter().map(|v| v.projector()).collect(),
    )?;
    let obs_a = embed_first(&obs_c, d2)?;
    let inst = Instrument::luders(&obs_a);
    let b_embedded = embed_second(obs_d, d1)?;
    let joint = successive_joint(&inst, &b_embedded, &psi.to_density())?;
    let instrument_agreement = distribution.max_abs_diff(&joint.distribution);

    Ok(ReductionReport {
        probabilities,
        conditional_states: conditionals,
        distribution,
        instrument_agreement,
    })
}

/// E^C ⊗ I₂ as an observable on the bipartite space.
pub fn embed_first(obs_c: &DiscreteObservable, d2: usize) -> Result<DiscreteObservable> {
    let i2 = CMatrix::identity(d2);
    DiscreteObservable::new(
        obs_c.values().to_vec(),
        obs_c.projections().iter().map(|p| p.kron(&i2)).collect(),
    )
}
