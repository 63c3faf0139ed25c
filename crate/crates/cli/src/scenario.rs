//! Scenario files: named definitions (matrices, observables, states, models,
//! instruments) plus an ordered task list. All matrices use the nested
//! [re, im] pair literal format.

use anyhow::{anyhow, bail, Context, Result};
use ovm_core::instruments::{IndirectModel, Instrument};
use ovm_core::linalg::CMatrix;
use ovm_core::models;
use ovm_core::observables::{DensityOperator, DiscreteObservable, StateVector};
use ovm_core::serial::{
    lit_to_amplitudes, lit_to_matrix, InstrumentFile, MatrixLit, ModelFile, ObservableDef,
    StateDef, VectorLit,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use std::collections::BTreeMap;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub definitions: DefinitionsFile,
    #[serde(default)]
    pub tasks: Vec<TaskDef>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefinitionsFile {
    #[serde(default)]
    pub matrices: BTreeMap<String, MatrixLit>,
    #[serde(default)]
    pub observables: BTreeMap<String, ObsDef>,
    #[serde(default)]
    pub states: BTreeMap<String, StateDef>,
    #[serde(default)]
    pub models: BTreeMap<String, ModelDef>,
    #[serde(default)]
    pub instruments: BTreeMap<String, InstrDef>,
}

/// Observable definition: inline spectral or Hermitian form, or a reference
/// to a named matrix to be decomposed.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ObsDef {
    Reference { matrix: String },
    Inline(ObservableDef),
}

/// Model definition: a builder applied to named ingredients, or the explicit
/// on-disk form.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelDef {
    Luders(String),
    Repeatable {
        observable: String,
        #[serde(default)]
        phases: Option<Vec<f64>>,
    },
    Counter(String),
    PhotonCounter(usize),
    Trivial {
        sys_dim: usize,
        probe_state: String,
        probe_observable: String,
    },
    RandomMeasuring {
        observable: String,
        #[serde(default = "default_probe_mult")]
        probe_mult: usize,
    },
    EmbedLocal {
        model: String,
        other_dim: usize,
    },
    Explicit(Box<ModelFile>),
}

fn default_probe_mult() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrDef {
    Luders(String),
    VonNeumann {
        observable: String,
        refinement: Vec<VectorLit>,
    },
    FromModel(String),
    Kraus(Box<InstrumentFile>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskDef {
    BuildInstrument {
        model: String,
        #[serde(default)]
        define: Option<String>,
        #[serde(default)]
        measures: Option<String>,
        #[serde(default)]
        save: Option<String>,
    },
    Audit {
        instrument: String,
    },
    Joint {
        instrument: String,
        observable: String,
        state: String,
    },
    Disturb {
        instrument: String,
        observable: String,
        #[serde(default)]
        evolution: Option<String>,
        #[serde(default)]
        expect: Option<bool>,
    },
    Simultaneous {
        instrument: String,
        observable: String,
        #[serde(default)]
        expect: Option<bool>,
    },
    Commutator {
        model: String,
        observable: String,
        #[serde(default)]
        expect: Option<bool>,
    },
    Local {
        model: String,
        split: [usize; 2],
        #[serde(default)]
        subsystem: usize,
        #[serde(default)]
        expect: Option<bool>,
    },
    Epr {
        model: String,
        split: [usize; 2],
        observable: String,
        state: String,
    },
    EprReduce {
        state: String,
        split: [usize; 2],
        basis: Vec<VectorLit>,
        observable: String,
    },
    Classify {
        instrument: String,
        observable: String,
        candidates: Vec<String>,
        #[serde(default)]
        expect_repeatable: Option<bool>,
        #[serde(default)]
        expect_projective: Option<bool>,
        #[serde(default)]
        expect_minimum_disturbing: Option<bool>,
    },
}

/// Fully resolved definitions ready for task execution.
pub struct Resolved {
    pub matrices: BTreeMap<String, CMatrix>,
    pub observables: BTreeMap<String, DiscreteObservable>,
    pub states: BTreeMap<String, DensityOperator>,
    pub state_vectors: BTreeMap<String, StateVector>,
    pub models: BTreeMap<String, IndirectModel>,
    pub instruments: BTreeMap<String, Instrument>,
}

impl Resolved {
    pub fn matrix(&self, name: &str) -> Result<&CMatrix> {
        self.matrices
            .get(name)
            .ok_or_else(|| anyhow!("undefined matrix `{name}`"))
    }

    pub fn observable(&self, name: &str) -> Result<&DiscreteObservable> {
        self.observables
            .get(name)
            .ok_or_else(|| anyhow!("undefined observable `{name}`"))
    }

    pub fn state(&self, name: &str) -> Result<&DensityOperator> {
        self.states
            .get(name)
            .ok_or_else(|| anyhow!("undefined state `{name}`"))
    }

    pub fn state_vector(&self, name: &str) -> Result<&StateVector> {
        self.state_vectors
            .get(name)
            .ok_or_else(|| anyhow!("state `{name}` is not defined as a vector"))
    }

    pub fn model(&self, name: &str) -> Result<&IndirectModel> {
        self.models
            .get(name)
            .ok_or_else(|| anyhow!("undefined model `{name}`"))
    }

    pub fn instrument(&self, name: &str) -> Result<&Instrument> {
        self.instruments
            .get(name)
            .ok_or_else(|| anyhow!("undefined instrument `{name}`"))
    }
}

fn model_seed(base: u64, name: &str) -> u64 {
    // stable FNV-1a over the definition name, folded into the run seed
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    base ^ h
}

pub fn resolve(defs: &DefinitionsFile, seed: u64) -> Result<Resolved> {
    let mut matrices = BTreeMap::new();
    for (name, lit) in &defs.matrices {
        matrices.insert(
            name.clone(),
            lit_to_matrix(lit).with_context(|| format!("matrix `{name}`"))?,
        );
    }

    let mut observables = BTreeMap::new();
    for (name, def) in &defs.observables {
        let obs = match def {
            ObsDef::Reference { matrix } => {
                let m = matrices.get(matrix).ok_or_else(|| {
                    anyhow!("observable `{name}` references undefined matrix `{matrix}`")
                })?;
                DiscreteObservable::from_hermitian(m)
            }
            ObsDef::Inline(inner) => inner.to_observable(),
        }
        .with_context(|| format!("observable `{name}`"))?;
        observables.insert(name.clone(), obs);
    }

    let mut states = BTreeMap::new();
    let mut state_vectors = BTreeMap::new();
    for (name, def) in &defs.states {
        states.insert(
            name.clone(),
            def.to_density()
                .with_context(|| format!("state `{name}`"))?,
        );
        if let StateDef::Vector { vector } = def {
            state_vectors.insert(
                name.clone(),
                StateVector::new(lit_to_amplitudes(vector))
                    .with_context(|| format!("state `{name}`"))?,
            );
        }
    }

    // models may reference other models (embedding); resolve recursively
    let mut models_out: BTreeMap<String, IndirectModel> = BTreeMap::new();
    let names: Vec<String> = defs.models.keys().cloned().collect();
    for name in &names {
        resolve_model(
            name,
            defs,
            &observables,
            &states,
            &mut models_out,
            &mut Vec::new(),
            seed,
        )?;
    }

    let mut instruments = BTreeMap::new();
    for (name, def) in &defs.instruments {
        let inst = match def {
            InstrDef::Luders(obs_name) => {
                let obs = observables.get(obs_name).ok_or_else(|| {
                    anyhow!("instrument `{name}` references undefined observable `{obs_name}`")
                })?;
                Instrument::luders(obs)
            }
            InstrDef::VonNeumann {
                observable,
                refinement,
            } => {
                let obs = observables.get(observable).ok_or_else(|| {
                    anyhow!("instrument `{name}` references undefined observable `{observable}`")
                })?;
                let basis = refinement
                    .iter()
                    .map(|v| StateVector::new(lit_to_amplitudes(v)))
                    .collect::<ovm_core::Result<Vec<_>>>()
                    .with_context(|| format!("instrument `{name}` refinement"))?;
                Instrument::von_neumann(obs, &basis)
                    .with_context(|| format!("instrument `{name}`"))?
            }
            InstrDef::FromModel(model_name) => {
                let model = models_out.get(model_name).ok_or_else(|| {
                    anyhow!("instrument `{name}` references undefined model `{model_name}`")
                })?;
                Instrument::from_model(model).with_context(|| format!("instrument `{name}`"))?
            }
            InstrDef::Kraus(file) => file
                .to_instrument()
                .with_context(|| format!("instrument `{name}`"))?,
        };
        instruments.insert(name.clone(), inst);
    }

    Ok(Resolved {
        matrices,
        observables,
        states,
        state_vectors,
        models: models_out,
        instruments,
    })
}

fn resolve_model(
    name: &str,
    defs: &DefinitionsFile,
    observables: &BTreeMap<String, DiscreteObservable>,
    states: &BTreeMap<String, DensityOperator>,
    out: &mut BTreeMap<String, IndirectModel>,
    stack: &mut Vec<String>,
    seed: u64,
) -> Result<()> {
    if out.contains_key(name) {
        return Ok(());
    }
    if stack.iter().any(|s| s == name) {
        bail!("model definitions form a cycle through `{name}`");
    }
    let def = defs
        .models
        .get(name)
        .ok_or_else(|| anyhow!("undefined model `{name}`"))?;
    stack.push(name.to_string());

    let lookup_obs = |obs_name: &str| -> Result<&DiscreteObservable> {
        observables
            .get(obs_name)
            .ok_or_else(|| anyhow!("model `{name}` references undefined observable `{obs_name}`"))
    };

    let model = match def {
        ModelDef::Luders(obs_name) => models::luders_model(lookup_obs(obs_name)?),
        ModelDef::Repeatable { observable, phases } => {
            models::repeatable_model(lookup_obs(observable)?, phases.as_deref())
        }
        ModelDef::Counter(obs_name) => models::counter_model(lookup_obs(obs_name)?),
        ModelDef::PhotonCounter(dim) => models::photon_counter_model(*dim),
        ModelDef::Trivial {
            sys_dim,
            probe_state,
            probe_observable,
        } => {
            let sigma = states.get(probe_state).ok_or_else(|| {
                anyhow!("model `{name}` references undefined state `{probe_state}`")
            })?;
            models::trivial_model(*sys_dim, sigma, lookup_obs(probe_observable)?)
        }
        ModelDef::RandomMeasuring {
            observable,
            probe_mult,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(model_seed(seed, name));
            models::random_measuring_model(lookup_obs(observable)?, *probe_mult, &mut rng)
        }
        ModelDef::EmbedLocal { model, other_dim } => {
            resolve_model(model, defs, observables, states, out, stack, seed)?;
            let inner = out
                .get(model)
                .ok_or_else(|| anyhow!("undefined model `{model}`"))?;
            models::embed_local(inner, *other_dim)
        }
        ModelDef::Explicit(file) => file.to_model(),
    }
    .with_context(|| format!("model `{name}`"))?;

    stack.pop();
    out.insert(name.to_string(), model);
    Ok(())
}

/// Validates every name a task mentions, including instruments defined by
/// earlier build-instrument tasks. Returns an error naming the first
/// offending definition.
pub fn validate_tasks(tasks: &[TaskDef], resolved: &Resolved) -> Result<()> {
    let mut instrument_names: Vec<String> = resolved.instruments.keys().cloned().collect();
    let has_instrument = |names: &[String], n: &str| names.iter().any(|k| k == n);
    for (idx, task) in tasks.iter().enumerate() {
        let fail = |what: &str, n: &str| bail!("task {idx} references undefined {what} `{n}`");
        match task {
            TaskDef::BuildInstrument {
                model,
                define,
                measures,
                ..
            } => {
                if !resolved.models.contains_key(model) {
                    return fail("model", model);
                }
                if let Some(obs) = measures {
                    if !resolved.observables.contains_key(obs) {
                        return fail("observable", obs);
                    }
                }
                if let Some(new_name) = define {
                    instrument_names.push(new_name.clone());
                }
            }
            TaskDef::Audit { instrument } => {
                if !has_instrument(&instrument_names, instrument) {
                    return fail("instrument", instrument);
                }
            }
            TaskDef::Joint {
                instrument,
                observable,
                state,
            } => {
                if !has_instrument(&instrument_names, instrument) {
                    return fail("instrument", instrument);
                }
                if !resolved.observables.contains_key(observable) {
                    return fail("observable", observable);
                }
                if !resolved.states.contains_key(state) {
                    return fail("state", state);
                }
            }
            TaskDef::Disturb {
                instrument,
                observable,
                evolution,
                ..
            } => {
                if !has_instrument(&instrument_names, instrument) {
                    return fail("instrument", instrument);
                }
                if !resolved.observables.contains_key(observable) {
                    return fail("observable", observable);
                }
                if let Some(v) = evolution {
                    if !resolved.matrices.contains_key(v) {
                        return fail("matrix", v);
                    }
                }
            }
            TaskDef::Simultaneous {
                instrument,
                observable,
                ..
            } => {
                if !has_instrument(&instrument_names, instrument) {
                    return fail("instrument", instrument);
                }
                if !resolved.observables.contains_key(observable) {
                    return fail("observable", observable);
                }
            }
            TaskDef::Commutator {
                model, observable, ..
            } => {
                if !resolved.models.contains_key(model) {
                    return fail("model", model);
                }
                if !resolved.observables.contains_key(observable) {
                    return fail("observable", observable);
                }
            }
            TaskDef::Local { model, .. } => {
                if !resolved.models.contains_key(model) {
                    return fail("model", model);
                }
            }
            TaskDef::Epr {
                model,
                observable,
                state,
                ..
            } => {
                if !resolved.models.contains_key(model) {
                    return fail("model", model);
                }
                if !resolved.observables.contains_key(observable) {
                    return fail("observable", observable);
                }
                if !resolved.states.contains_key(state) {
                    return fail("state", state);
                }
            }
            TaskDef::EprReduce {
                state, observable, ..
            } => {
                if !resolved.states.contains_key(state) {
                    return fail("state", state);
                }
                if !resolved.observables.contains_key(observable) {
                    return fail("observable", observable);
                }
            }
            TaskDef::Classify {
                instrument,
                observable,
                candidates,
                ..
            } => {
                if !has_instrument(&instrument_names, instrument) {
                    return fail("instrument", instrument);
                }
                if !resolved.observables.contains_key(observable) {
                    return fail("observable", observable);
                }
                for c in candidates {
                    if !resolved.observables.contains_key(c) {
                        return fail("observable", c);
                    }
                }
            }
        }
    }
    Ok(())
}
