//! File formats. Matrices are written as nested arrays of [re, im] pairs in
//! row-major order; the JSON float encoding round-trips f64 bit-exactly.

use crate::error::{Error, Result};
use crate::instruments::{IndirectModel, Instrument, Superoperator};
use crate::linalg::{CMatrix, C64};
use crate::observables::{DensityOperator, DiscreteObservable, StateVector};
use serde::{Deserialize, Serialize};

pub type MatrixLit = Vec<Vec<[f64; 2]>>;
pub type VectorLit = Vec<[f64; 2]>;

pub fn matrix_to_lit(m: &CMatrix) -> MatrixLit {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| [m.get(i, j).re, m.get(i, j).im])
                .collect()
        })
        .collect()
}

pub fn lit_to_matrix(lit: &MatrixLit) -> Result<CMatrix> {
    if lit.is_empty() {
        return Err(Error::Serialization("matrix literal is empty".into()));
    }
    let cols = lit[0].len();
    if cols == 0 || lit.iter().any(|row| row.len() != cols) {
        return Err(Error::Serialization(
            "matrix literal rows have inconsistent lengths".into(),
        ));
    }
    CMatrix::new(
        lit.len(),
        cols,
        lit.iter()
            .flatten()
            .map(|&[re, im]| C64::new(re, im))
            .collect(),
    )
}

pub fn vector_to_lit(v: &[C64]) -> VectorLit {
    v.iter().map(|x| [x.re, x.im]).collect()
}

pub fn lit_to_amplitudes(lit: &VectorLit) -> Vec<C64> {
    lit.iter().map(|&[re, im]| C64::new(re, im)).collect()
}

/// Observable on disk: either an explicit spectral form or a Hermitian
/// matrix decomposed on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableDef {
    Spectral {
        dim: usize,
        outcomes: Vec<OutcomeDef>,
    },
    Hermitian {
        dim: usize,
        hermitian: MatrixLit,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeDef {
    pub value: f64,
    pub projection: MatrixLit,
}

impl ObservableDef {
    pub fn to_observable(&self) -> Result<DiscreteObservable> {
        match self {
            ObservableDef::Spectral { dim, outcomes } => {
                let values = outcomes.iter().map(|o| o.value).collect();
                let projections = outcomes
                    .iter()
                    .map(|o| lit_to_matrix(&o.projection))
                    .collect::<Result<Vec<_>>>()?;
                let obs = DiscreteObservable::new(values, projections)?;
                if obs.dim() != *dim {
                    return Err(Error::Serialization(format!(
                        "declared dimension {dim} does not match projections"
                    )));
                }
                Ok(obs)
            }
            ObservableDef::Hermitian { dim, hermitian } => {
                let m = lit_to_matrix(hermitian)?;
                if m.rows() != *dim {
                    return Err(Error::Serialization(format!(
                        "declared dimension {dim} does not match matrix"
                    )));
                }
                DiscreteObservable::from_hermitian(&m)
            }
        }
    }

    pub fn from_observable(obs: &DiscreteObservable) -> Self {
        ObservableDef::Spectral {
            dim: obs.dim(),
            outcomes: (0..obs.num_outcomes())
                .map(|n| OutcomeDef {
                    value: obs.value(n),
                    projection: matrix_to_lit(obs.projection(n)),
                })
                .collect(),
        }
    }
}

/// Instrument on disk: one Kraus operator list per outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstrumentFile {
    pub dim: usize,
    pub outcomes: Vec<f64>,
    pub branches: Vec<Vec<MatrixLit>>,
}

impl InstrumentFile {
    pub fn from_instrument(inst: &Instrument) -> Result<Self> {
        Ok(Self {
            dim: inst.dim(),
            outcomes: inst.outcome_values().to_vec(),
            branches: inst
                .kraus_branches()?
                .iter()
                .map(|ops| ops.iter().map(matrix_to_lit).collect())
                .collect(),
        })
    }

    pub fn to_instrument(&self) -> Result<Instrument> {
        let branches = self
            .branches
            .iter()
            .map(|ops| {
                let kraus = ops.iter().map(lit_to_matrix).collect::<Result<Vec<_>>>()?;
                Superoperator::from_kraus(self.dim, &kraus)
            })
            .collect::<Result<Vec<_>>>()?;
        Instrument::new(self.dim, self.outcomes.clone(), branches)
    }
}

/// Indirect measurement model on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub sys_dim: usize,
    pub probe_dim: usize,
    pub sigma: MatrixLit,
    pub unitary: MatrixLit,
    pub probe_observable: ObservableDef,
}

impl ModelFile {
    pub fn from_model(model: &IndirectModel) -> Self {
        Self {
            sys_dim: model.sys_dim(),
            probe_dim: model.probe_dim(),
            sigma: matrix_to_lit(model.probe_state().matrix()),
            unitary: matrix_to_lit(model.interaction()),
            probe_observable: ObservableDef::from_observable(model.probe_observable()),
        }
    }

    pub fn to_model(&self) -> Result<IndirectModel> {
        IndirectModel::new(
            self.sys_dim,
            self.probe_dim,
            DensityOperator::new(lit_to_matrix(&self.sigma)?)?,
            lit_to_matrix(&self.unitary)?,
            self.probe_observable.to_observable()?,
        )
    }
}

/// State on disk: a vector or a density matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateDef {
    Vector { vector: VectorLit },
    Density { density: MatrixLit },
}

impl StateDef {
    pub fn to_density(&self) -> Result<DensityOperator> {
        match self {
            StateDef::Vector { vector } => {
                Ok(StateVector::new(lit_to_amplitudes(vector))?.to_density())
            }
            StateDef::Density { density } => DensityOperator::new(lit_to_matrix(density)?),
        }
    }

    pub fn to_state_vector(&self) -> Result<StateVector> {
        match self {
            StateDef::Vector { vector } => StateVector::new(lit_to_amplitudes(vector)),
            StateDef::Density { .. } => Err(Error::Serialization(
                "a state vector is required here, not a density matrix".into(),
            )),
        }
    }
}

pub fn save_instrument(inst: &Instrument, path: &std::path::Path) -> Result<()> {
    let file = InstrumentFile::from_instrument(inst)?;
    let text =
        serde_json::to_string_pretty(&file).map_err(|e| Error::Serialization(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn load_instrument(path: &std::path::Path) -> Result<Instrument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Serialization(e.to_string()))?;
    let file: InstrumentFile =
        serde_json::from_str(&text).map_err(|e| Error::Serialization(e.to_string()))?;
    file.to_instrument()
}

pub fn save_model(model: &IndirectModel, path: &std::path::Path) -> Result<()> {
    let file = ModelFile::from_model(model);
    let text =
        serde_json::to_string_pretty(&file).map_err(|e| Error::Serialization(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn load_model(path: &std::path::Path) -> Result<IndirectModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Serialization(e.to_string()))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::Serialization(e.to_string()))?;
    file.to_model()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pauli_z;
    use crate::models;
    use crate::sample;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matrix_literal_roundtrip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = sample::random_matrix(3, &mut rng);
        let text = serde_json::to_string(&matrix_to_lit(&m)).unwrap();
        let lit: MatrixLit = serde_json::from_str(&text).unwrap();
        let back = lit_to_matrix(&lit).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), back.get(i, j));
            }
        }
    }

    #[test]
    fn observable_defs_roundtrip() {
        let obs = DiscreteObservable::from_hermitian(&pauli_z()).unwrap();
        let def = ObservableDef::from_observable(&obs);
        let back = def.to_observable().unwrap();
        assert_eq!(back.num_outcomes(), 2);
        assert!(back.projection(0).approx_eq(obs.projection(0), 0.0));

        let herm = ObservableDef::Hermitian {
            dim: 2,
            hermitian: matrix_to_lit(&pauli_z()),
        };
        let from_herm = herm.to_observable().unwrap();
        assert!((from_herm.value(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn instrument_file_roundtrip_preserves_branch_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = sample::random_model(3, 2, &mut rng);
        let inst = Instrument::from_model(&model).unwrap();
        let file = InstrumentFile::from_instrument(&inst).unwrap();
        let text = serde_json::to_string(&file).unwrap();
        let reloaded: InstrumentFile = serde_json::from_str(&text).unwrap();
        let back = reloaded.to_instrument().unwrap();
        for n in 0..inst.num_outcomes() {
            assert!(back.branch(n).rep().approx_eq(inst.branch(n).rep(), 1e-9));
        }
    }

    #[test]
    fn model_file_roundtrip() {
        let model = models::photon_counter_model(3).unwrap();
        let file = ModelFile::from_model(&model);
        let text = serde_json::to_string(&file).unwrap();
        let reloaded: ModelFile = serde_json::from_str(&text).unwrap();
        let back = reloaded.to_model().unwrap();
        assert!(back.interaction().approx_eq(model.interaction(), 0.0));
        assert!(back
            .probe_state()
            .matrix()
            .approx_eq(model.probe_state().matrix(), 0.0));
    }

    #[test]
    fn bad_literals_are_rejected() {
        assert!(lit_to_matrix(&vec![]).is_err());
        assert!(lit_to_matrix(&vec![vec![[1.0, 0.0]], vec![]]).is_err());
    }

    #[test]
    fn instrument_files_are_revalidated_on_load() {
        // a lone projector branch: total not trace-preserving
        let file = InstrumentFile {
            dim: 2,
            outcomes: vec![1.0],
            branches: vec![vec![matrix_to_lit(&CMatrix::diag_real(&[1.0, 0.0]))]],
        };
        assert!(file.to_instrument().is_err());
    }
}
