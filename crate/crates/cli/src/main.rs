//! Batch scenario runner for the quantum measurement toolkit.

mod report;
mod scenario;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use ovm_core::classify::classify;
use ovm_core::instruments::{audit_davies_lewis, Instrument};
use ovm_core::linalg::DimSplit;
use ovm_core::observables::StateVector;
use ovm_core::serial::{lit_to_amplitudes, load_instrument, save_instrument};
use ovm_core::successive::{
    commutator_criterion, disturbs, epr_joint, epr_reduction, is_local, is_simultaneous,
    successive_joint,
};
use report::{render_record, Report, TaskRecord, Verdict};
use scenario::{resolve, validate_tasks, ScenarioFile, TaskDef};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const DEFAULT_SEED: u64 = 7;
const DEFAULT_SAMPLES: usize = 32;

#[derive(Parser)]
#[command(name = "ovm", about = "Quantum measurement scenario runner", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and emit a report.
    Run {
        /// Scenario file (JSON).
        scenario: PathBuf,
        /// Seed for all randomized checks.
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Sample count for randomized checks.
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        /// Verdict threshold applied to residuals.
        #[arg(long, default_value_t = ovm_core::TOL)]
        tol: f64,
        /// Continue past failing tasks.
        #[arg(long)]
        keep_going: bool,
        /// Machine-readable report path (default: scenario path with
        /// extension `.report.json`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Audit an instrument file: shorthand for a one-task scenario.
    Check {
        /// Instrument file (JSON, Kraus form).
        instrument: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = ovm_core::TOL)]
        tol: f64,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            seed,
            samples,
            tol,
            keep_going,
            out,
        } => match run_scenario(&scenario, seed, samples, tol, keep_going, out.as_deref()) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(err) => {
                eprintln!("error: {err:#}");
                ExitCode::from(2)
            }
        },
        Command::Check {
            instrument,
            seed,
            samples,
            tol,
        } => match check_instrument(&instrument, seed, samples, tol) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(err) => {
                eprintln!("error: {err:#}");
                ExitCode::from(2)
            }
        },
    }
}

fn check_instrument(path: &Path, seed: u64, samples: usize, tol: f64) -> Result<bool> {
    let inst = load_instrument(path).with_context(|| format!("loading {}", path.display()))?;
    let audit = audit_davies_lewis(&inst, samples, seed);
    let pass = audit.max_residual() <= tol;
    println!(
        "instrument {}: dimension {}, {} outcomes",
        path.display(),
        inst.dim(),
        inst.num_outcomes()
    );
    println!(
        "  additivity residual:          {:.3e}",
        audit.additivity_residual
    );
    println!(
        "  trace preservation residual:  {:.3e}",
        audit.trace_residual
    );
    println!(
        "  positivity residual:          {:.3e}",
        audit.positivity_residual
    );
    println!(
        "  complete positivity residual: {:.3e}",
        audit.complete_positivity_residual
    );
    println!(
        "  affinity residual:            {:.3e}",
        audit.affinity_residual
    );
    println!("verdict: {}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

fn run_scenario(
    path: &Path,
    seed: u64,
    samples: usize,
    tol: f64,
    keep_going: bool,
    out: Option<&Path>,
) -> Result<bool> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: ScenarioFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut resolved = resolve(&file.definitions, seed)?;
    validate_tasks(&file.tasks, &resolved)?;

    println!(
        "scenario {}: {} tasks (seed {seed}, tol {tol:.1e})",
        file.name,
        file.tasks.len()
    );
    let mut results: Vec<TaskRecord> = Vec::new();
    let mut aborted = false;
    for (index, task) in file.tasks.iter().enumerate() {
        let record = match execute_task(index, task, &mut resolved, seed, samples, tol) {
            Ok(record) => record,
            Err(err) => TaskRecord {
                index,
                task: task_name(task).to_string(),
                subject: String::new(),
                verdict: Verdict::Fail,
                residual: None,
                table: None,
                witness: None,
                details: None,
                error: Some(format!("{err:#}")),
            },
        };
        print!("{}", render_record(&record));
        let failed = record.failed();
        results.push(record);
        if failed && !keep_going {
            aborted = true;
            break;
        }
    }

    let passed = !results.iter().any(|r| r.failed());
    let report = Report {
        scenario: file.name.clone(),
        seed,
        samples,
        tol,
        results,
        passed,
    };
    let out_path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| path.with_extension("report.json"));
    let json = serde_json::to_string_pretty(&report).context("encoding report")?;
    std::fs::write(&out_path, json).with_context(|| format!("writing {}", out_path.display()))?;

    if aborted {
        println!("aborted after first failure (pass --keep-going to continue)");
    }
    println!(
        "scenario {}: {} — report written to {}",
        file.name,
        if passed { "PASS" } else { "FAIL" },
        out_path.display()
    );
    Ok(passed)
}

fn task_name(task: &TaskDef) -> &'static str {
    match task {
        TaskDef::BuildInstrument { .. } => "build-instrument",
        TaskDef::Audit { .. } => "audit",
        TaskDef::Joint { .. } => "joint",
        TaskDef::Disturb { .. } => "disturb",
        TaskDef::Simultaneous { .. } => "simultaneous",
        TaskDef::Commutator { .. } => "commutator",
        TaskDef::Local { .. } => "local",
        TaskDef::Epr { .. } => "epr",
        TaskDef::EprReduce { .. } => "epr-reduce",
        TaskDef::Classify { .. } => "classify",
    }
}

fn expectation_verdict(actual: bool, expect: Option<bool>) -> Verdict {
    match expect {
        None => Verdict::Info,
        Some(want) if want == actual => Verdict::Pass,
        Some(_) => Verdict::Fail,
    }
}

fn combine(a: Verdict, b: Verdict) -> Verdict {
    match (a, b) {
        (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
        (Verdict::Pass, _) | (_, Verdict::Pass) => Verdict::Pass,
        _ => Verdict::Info,
    }
}

fn execute_task(
    index: usize,
    task: &TaskDef,
    resolved: &mut scenario::Resolved,
    seed: u64,
    samples: usize,
    tol: f64,
) -> Result<TaskRecord> {
    let task_seed = seed.wrapping_add(index as u64);
    let mut record = TaskRecord {
        index,
        task: task_name(task).to_string(),
        subject: String::new(),
        verdict: Verdict::Info,
        residual: None,
        table: None,
        witness: None,
        details: None,
        error: None,
    };
    match task {
        TaskDef::BuildInstrument {
            model,
            define,
            measures,
            save,
        } => {
            record.subject = format!("model={model}");
            let inst = Instrument::from_model(resolved.model(model)?)?;
            record.verdict = Verdict::Pass;
            if let Some(obs_name) = measures {
                let resid = inst.measures_residual(resolved.observable(obs_name)?)?;
                record.residual = Some(resid);
                record.subject = format!("model={model} measures={obs_name}");
                if resid > tol {
                    record.verdict = Verdict::Fail;
                    record.witness = Some(format!(
                        "instrument does not measure `{obs_name}` (residual {resid:.3e})"
                    ));
                }
            }
            record.details = Some(serde_json::json!({
                "dim": inst.dim(),
                "outcomes": inst.outcome_values(),
                "sharp": inst.observable().is_some(),
            }));
            if let Some(path) = save {
                save_instrument(&inst, Path::new(path))?;
            }
            if let Some(name) = define {
                resolved.instruments.insert(name.clone(), inst);
            }
        }
        TaskDef::Audit { instrument } => {
            record.subject = format!("instrument={instrument}");
            let audit = audit_davies_lewis(resolved.instrument(instrument)?, samples, task_seed);
            record.residual = Some(audit.max_residual());
            record.verdict = if audit.max_residual() <= tol {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            record.details = Some(serde_json::to_value(&audit)?);
        }
        TaskDef::Joint {
            instrument,
            observable,
            state,
        } => {
            record.subject =
                format!("instrument={instrument} observable={observable} state={state}");
            let joint = successive_joint(
                resolved.instrument(instrument)?,
                resolved.observable(observable)?,
                resolved.state(state)?,
            )?;
            record.residual = Some(joint.dual_route_residual);
            record.verdict = if joint.dual_route_residual <= tol {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            record.table = Some(joint.distribution);
        }
        TaskDef::Disturb {
            instrument,
            observable,
            evolution,
            expect,
        } => {
            record.subject = format!("instrument={instrument} observable={observable}");
            let evolution = match evolution {
                Some(name) => Some(resolved.matrix(name)?.clone()),
                None => None,
            };
            let rep = disturbs(
                resolved.instrument(instrument)?,
                resolved.observable(observable)?,
                evolution.as_ref(),
            )?;
            let disturbed = rep.residual > tol;
            record.residual = Some(rep.residual);
            record.witness = Some(format!(
                "{} (worst outcome index {})",
                if disturbed {
                    "disturbed"
                } else {
                    "not disturbed"
                },
                rep.worst_outcome
            ));
            record.verdict = expectation_verdict(disturbed, *expect);
        }
        TaskDef::Simultaneous {
            instrument,
            observable,
            expect,
        } => {
            record.subject = format!("instrument={instrument} observable={observable}");
            let rep = is_simultaneous(
                resolved.instrument(instrument)?,
                resolved.observable(observable)?,
            )?;
            let simultaneous = rep.residual <= tol;
            let disturbed = rep.disturbance.residual > tol;
            record.residual = Some(rep.residual);
            record.witness = Some(if simultaneous {
                "simultaneous".to_string()
            } else {
                format!("not simultaneous (worst outcome pair {:?})", rep.worst_pair)
            });
            let coherence = if simultaneous == !disturbed {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            record.verdict = combine(coherence, expectation_verdict(simultaneous, *expect));
        }
        TaskDef::Commutator {
            model,
            observable,
            expect,
        } => {
            record.subject = format!("model={model} observable={observable}");
            let rep =
                commutator_criterion(resolved.model(model)?, resolved.observable(observable)?)?;
            let nondisturbing = rep.residual <= tol;
            let disturbed = rep.disturbance.residual > tol;
            record.residual = Some(rep.residual);
            record.witness = Some(
                if nondisturbing {
                    "interaction commutes on the prepared subspace"
                } else {
                    "interaction moves the observable"
                }
                .to_string(),
            );
            let coherence = if nondisturbing == !disturbed {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            record.verdict = combine(coherence, expectation_verdict(nondisturbing, *expect));
        }
        TaskDef::Local {
            model,
            split,
            subsystem,
            expect,
        } => {
            record.subject = format!("model={model} split={split:?} subsystem={subsystem}");
            let rep = is_local(
                resolved.model(model)?,
                &DimSplit::new(split.to_vec())?,
                *subsystem,
            )?;
            let local = rep.residual <= tol;
            record.residual = Some(rep.residual);
            record.witness = Some(if local { "local" } else { "not local" }.to_string());
            record.verdict = expectation_verdict(local, *expect);
        }
        TaskDef::Epr {
            model,
            split,
            observable,
            state,
        } => {
            record.subject = format!("model={model} observable={observable} state={state}");
            let rep = epr_joint(
                resolved.model(model)?,
                &DimSplit::new(split.to_vec())?,
                resolved.observable(observable)?,
                resolved.state(state)?,
            )?;
            record.residual = Some(rep.max_discrepancy);
            record.verdict = if rep.max_discrepancy <= tol {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            record.table = Some(rep.distribution);
        }
        TaskDef::EprReduce {
            state,
            split,
            basis,
            observable,
        } => {
            record.subject = format!("state={state} observable={observable}");
            let basis = basis
                .iter()
                .map(|v| StateVector::new(lit_to_amplitudes(v)))
                .collect::<ovm_core::Result<Vec<_>>>()
                .map_err(|e| anyhow!("reduction basis: {e}"))?;
            let rep = epr_reduction(
                resolved.state_vector(state)?,
                &DimSplit::new(split.to_vec())?,
                &basis,
                resolved.observable(observable)?,
            )?;
            record.residual = Some(rep.instrument_agreement);
            record.verdict = if rep.instrument_agreement <= tol {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            record.details = Some(serde_json::json!({
                "probabilities": rep.probabilities,
                "conditional_states": rep.conditional_states,
            }));
            record.table = Some(rep.distribution);
        }
        TaskDef::Classify {
            instrument,
            observable,
            candidates,
            expect_repeatable,
            expect_projective,
            expect_minimum_disturbing,
        } => {
            record.subject = format!("instrument={instrument} observable={observable}");
            let cands = candidates
                .iter()
                .map(|c| resolved.observable(c).cloned())
                .collect::<Result<Vec<_>>>()?;
            let rep = classify(
                resolved.instrument(instrument)?,
                resolved.observable(observable)?,
                &cands,
            )?;
            let repeatable = rep.repeatability_residual <= tol;
            let projective = rep.projection_residual <= tol;
            record.residual = Some(rep.projection_residual);
            record.witness = Some(format!(
                "repeatable={repeatable} projective={projective} disturbed={:?}",
                rep.disturbed_candidates
            ));
            let mut verdict = if rep.theorem_violations.is_empty() {
                Verdict::Info
            } else {
                Verdict::Fail
            };
            verdict = combine(verdict, expectation_verdict(repeatable, *expect_repeatable));
            verdict = combine(verdict, expectation_verdict(projective, *expect_projective));
            verdict = combine(
                verdict,
                expectation_verdict(projective, *expect_minimum_disturbing),
            );
            record.verdict = verdict;
            record.details = Some(serde_json::to_value(&rep)?);
        }
    }
    Ok(record)
}
