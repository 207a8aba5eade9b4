//! Exact thermalization dynamics of a two-level system coupled to a finite
//! two-band bath, with the HAM rate-equation scheme as reference.
//!
//! Pipeline: [`model`] builds the Hamiltonian, [`dynamics`] prepares and
//! propagates the full pure state, [`observables`] traces out the bath,
//! [`ham`] supplies the rate-equation prediction, [`metrics`] compares the
//! two and [`harness`] runs the numerical experiments and writes files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

// Links the system OpenBLAS used by ndarray's matrix products.
extern crate blas_src;

pub mod dynamics;
pub mod ham;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod observables;
pub mod ode;
pub mod random;

use thiserror::Error;

pub use dynamics::{build_propagator, PureState, SpectralPropagator};
pub use model::{build_model, check_conditions, FiniteBathModel, ModelParams};
pub use observables::{reduce, ReducedState, Trajectory};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] model::ModelError),
    #[error(transparent)]
    Dynamics(#[from] dynamics::DynamicsError),
    #[error(transparent)]
    Observables(#[from] observables::ObservablesError),
    #[error(transparent)]
    Ham(#[from] ham::HamError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error(transparent)]
    Config(#[from] harness::config::ConfigError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("{context}: {source}")]
    Context { context: String, source: Box<Error> },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context { context: context.into(), source: Box::new(self) }
    }

    /// True for bad input (configuration or parameters), false for failures
    /// during the computation itself.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Config(_) | Error::Model(_) => true,
            Error::Context { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// JSON has no infinities; non-finite values are written as strings.
pub(crate) fn serialize_extended_f64<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}
