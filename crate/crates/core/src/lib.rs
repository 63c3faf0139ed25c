//! Finite-dimensional quantum measurement toolkit.
//!
//! Builds operation-valued measures (instruments) from indirect measurement
//! models, computes successive-measurement joint statistics, and decides
//! compatibility, disturbance, simultaneity, repeatability, locality, and
//! minimum disturbance numerically.

pub mod classify;
pub mod error;
pub mod instruments;
pub mod linalg;
pub mod models;
pub mod observables;
pub mod sample;
pub mod serial;
pub mod successive;

pub use error::{Error, Result};
pub use instruments::{IndirectModel, Instrument, Superoperator};
pub use linalg::{CMatrix, DimSplit, C64, CLUSTER_TOL, TOL};
pub use observables::{DensityOperator, DiscreteObservable, OutcomeSet, StateVector};
