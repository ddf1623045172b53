//! Simulation: covariate generators, the response model, experiment
//! configuration and the Monte Carlo runners.

pub mod cases;
pub mod config;
pub mod metrics;
pub mod response;
pub mod rng;
pub mod runners;

use thiserror::Error;

pub use cases::{gen_covariates, gen_covariates_tagged, CaseTag, CovarianceSpec, CovariateCase};
pub use config::{ConfigError, DataFormat, DatasetSpec, ExperimentConfig, RunnerKind, Transform};
pub use metrics::{MetricRow, MetricTable};
pub use response::{gen_response, simulate, ErrorModel};
pub use rng::StreamKey;
pub use runners::{
    bootstrap_mse, loglog_slope, rate_check, run_coverage_experiment, run_experiment,
    run_mse_experiment, run_mspe_experiment, timing_benchmark,
};

use crate::data::DataError;
use crate::methods::MethodError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation setup: {0}")]
    InvalidCase(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Method(#[from] MethodError),
}
