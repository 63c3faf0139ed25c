//! Apparatus classification: repeatability, the projection postulate,
//! disturbed-observable sets, and the minimum-disturbance characterization.

use crate::error::{Error, Result};
use crate::instruments::Instrument;
use crate::linalg::{CLUSTER_TOL, TOL};
use crate::observables::DiscreteObservable;
use crate::successive::disturbs;

fn require_compatible(inst: &Instrument, obs: &DiscreteObservable) -> Result<()> {
    let resid = inst.measures_residual(obs)?;
    if resid > TOL {
        return Err(Error::NotCompatible(format!(
            "compatibility residual {resid}"
        )));
    }
    Ok(())
}

fn matched_projection(inst: &Instrument, obs: &DiscreteObservable, n: usize) -> Option<usize> {
    obs.values()
        .iter()
        .position(|&w| (w - inst.outcome_values()[n]).abs() <= CLUSTER_TOL)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct RepeatabilityReport {
    pub repeatable: bool,
    pub residual: f64,
    /// Outcome pair (first, repeat) realizing the worst residual.
    pub witness: Option<(usize, usize)>,
}

/// Repeatability: an immediate second measurement of the same observable
/// reproduces the first outcome with probability one. Over all states this
/// reduces to X{aₙ}*E^A{a_m} = 0 for n ≠ m together with
/// X{aₙ}*E^A{aₙ} = X{aₙ}*I.
pub fn satisfies_repeatability(
    inst: &Instrument,
    obs: &DiscreteObservable,
) -> Result<RepeatabilityReport> {
    require_compatible(inst, obs)?;
    let mut residual = 0.0f64;
    let mut witness = None;
    for n in 0..inst.num_outcomes() {
        let dual = inst.branch(n).dual();
        let own = matched_projection(inst, obs, n);
        for m in 0..obs.num_outcomes() {
            let moved = dual.apply(obs.projection(m))?;
            let r = if Some(m) == own {
                (&moved - &inst.effect(n)).op_norm()
            } else {
                moved.op_norm()
            };
            if r > residual {
                residual = r;
                witness = Some((n, m));
            }
        }
    }
    Ok(RepeatabilityReport {
        repeatable: residual <= TOL,
        witness: if residual > TOL { witness } else { None },
        residual,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ProjectionReport {
    pub projective: bool,
    pub residual: f64,
    /// Branch realizing the worst deviation from the projective state change.
    pub witness: Option<usize>,
}

/// Projection postulate: every branch equals the projective state change
/// ρ ↦ E^A{aₙ}·ρ·E^A{aₙ}, decided over the matrix-unit basis.
pub fn satisfies_projection_postulate(
    inst: &Instrument,
    obs: &DiscreteObservable,
) -> Result<ProjectionReport> {
    require_compatible(inst, obs)?;
    let d = inst.dim();
    let mut residual = 0.0f64;
    let mut witness = None;
    for n in 0..inst.num_outcomes() {
        let proj = match matched_projection(inst, obs, n) {
            Some(k) => obs.projection(k).clone(),
            None => crate::linalg::CMatrix::zeros(d, d),
        };
        let mut branch_worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let unit = crate::linalg::CMatrix::matrix_unit(d, i, j);
                let got = inst.branch(n).apply(&unit)?;
                let want = proj.matmul(&unit).matmul(&proj);
                branch_worst = branch_worst.max((&got - &want).op_norm());
            }
        }
        if branch_worst > residual {
            residual = branch_worst;
            witness = Some(n);
        }
    }
    Ok(ProjectionReport {
        projective: residual <= TOL,
        witness: if residual > TOL { witness } else { None },
        residual,
    })
}

/// Indices of the candidates the instrument disturbs.
pub fn disturbed_set(inst: &Instrument, candidates: &[DiscreteObservable]) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (k, b) in candidates.iter().enumerate() {
        if disturbs(inst, b, None)?.disturbed {
            out.push(k);
        }
    }
    Ok(out)
}

/// Evidence gathered for one candidate observable.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CandidateEvidence {
    pub candidate: usize,
    pub commutes: bool,
    pub disturbed: bool,
    pub disturbance_residual: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ClassificationReport {
    pub repeatable: bool,
    pub projective: bool,
    pub minimum_disturbing: bool,
    pub repeatability_residual: f64,
    pub projection_residual: f64,
    pub disturbed_candidates: Vec<usize>,
    pub evidence: Vec<CandidateEvidence>,
    /// Commuting-but-disturbed candidates explaining a negative verdict.
    pub witnesses: Vec<usize>,
    /// Candidate evidence contradicting the characterization; any entry is an
    /// implementation bug, not a physical finding.
    pub theorem_violations: Vec<String>,
}

/// Classifies an apparatus against a candidate list. Minimum disturbance is
/// decided by coincidence with the projective state change; quantifying over
/// all apparatuses is not finitely checkable, and the characterization makes
/// the two equivalent. The candidate evidence makes the set-inclusion
/// definition partially observable: the disturbed set of a minimum-disturbing
/// apparatus must avoid every candidate commuting with the measured
/// observable, while noncommuting candidates must be disturbed regardless of
/// the verdict.
pub fn classify(
    inst: &Instrument,
    obs: &DiscreteObservable,
    candidates: &[DiscreteObservable],
) -> Result<ClassificationReport> {
    let repeatability = satisfies_repeatability(inst, obs)?;
    let projection = satisfies_projection_postulate(inst, obs)?;
    let minimum_disturbing = projection.projective;

    let mut evidence = Vec::with_capacity(candidates.len());
    let mut disturbed_candidates = Vec::new();
    let mut witnesses = Vec::new();
    let mut violations = Vec::new();

    for (k, b) in candidates.iter().enumerate() {
        let commutes = obs.commutes_with(b)?;
        let report = disturbs(inst, b, None)?;
        if report.disturbed {
            disturbed_candidates.push(k);
        }
        if !commutes && !report.disturbed {
            violations.push(format!(
                "candidate {k} does not commute with the measured observable yet is undisturbed"
            ));
        }
        if minimum_disturbing && commutes && report.disturbed {
            violations.push(format!(
                "candidate {k} commutes with the measured observable yet is disturbed by a projective apparatus"
            ));
        }
        if !minimum_disturbing && commutes && report.disturbed {
            witnesses.push(k);
        }
        evidence.push(CandidateEvidence {
            candidate: k,
            commutes,
            disturbed: report.disturbed,
            disturbance_residual: report.residual,
        });
    }

    // independent partial check of the set-inclusion definition: the
    // projective apparatus for the same observable is the reference minimum
    let reference = disturbed_set(&Instrument::luders(obs), candidates)?;
    if minimum_disturbing {
        for k in &disturbed_candidates {
            if !reference.contains(k) {
                violations.push(format!(
                    "candidate {k} is disturbed although the projective reference leaves it alone"
                ));
            }
        }
    }

    Ok(ClassificationReport {
        repeatable: repeatability.repeatable,
        projective: projection.projective,
        minimum_disturbing,
        repeatability_residual: repeatability.residual,
        projection_residual: projection.residual,
        disturbed_candidates,
        evidence,
        witnesses,
        theorem_violations: violations,
    })
}
