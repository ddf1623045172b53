//! Information-based optimal subdata selection for linear regression on
//! tall data, with the estimators, baselines and diagnostics around it.
//!
//! The selection keeps, for every covariate, the rows holding its most
//! extreme values, which is what drives the determinant of the information
//! matrix up. Selection costs `O(np)`; the fit afterwards only sees the
//! `k` selected rows.
//!
//! ```
//! use iboss_core::{iboss_dopt, ols_fit, DataMatrix, SelectionMode, SelectionSpec};
//!
//! let z: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
//! let y: Vec<f64> = z.iter().map(|v| 1.0 + 2.0 * v).collect();
//! let data = DataMatrix::from_columns(vec![z], y).unwrap();
//!
//! let sub = iboss_dopt(&data, &SelectionSpec::new(10, SelectionMode::Sequential)).unwrap();
//! let fit = ols_fit(&sub).unwrap();
//! assert!((fit.beta1[0] - 2.0).abs() < 1e-10);
//! ```

pub mod baselines;
pub mod criteria;
pub mod data;
pub mod estimation;
pub mod linalg;
pub mod methods;
pub mod select;
pub mod simgen;

use thiserror::Error;

pub use baselines::{BaselineError, DrawCounts, SamplingPlan, SubsamplingMethod};
pub use criteria::{BoundReport, BoundValue, CriteriaError, InfoMatrix};
pub use data::{DataError, DataMatrix};
pub use estimation::{
    adjusted_intercept, confidence_interval, ols_fit, predict_mean, ConfidenceInterval,
    EstimationError, FitResult, Intercept,
};
pub use linalg::{LinalgError, Matrix};
pub use methods::{estimate, Method, MethodError, MethodOptions, MethodOutcome};
pub use select::{iboss_dopt, Provenance, SelectionError, SelectionMode, SelectionSpec, Subdata};
pub use simgen::{ExperimentConfig, MetricTable, SimError, StreamKey};

/// Any error raised by this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Criteria(#[from] CriteriaError),
    #[error(transparent)]
    Method(#[from] MethodError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
