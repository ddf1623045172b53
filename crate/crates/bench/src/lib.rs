//! Shared fixtures for the benchmarks.

use iboss_core::simgen::{simulate, CaseTag, CovariateCase, ErrorModel};
use iboss_core::{DataMatrix, StreamKey};

/// Correlated normal covariates with unit coefficients.
pub fn normal_data(n: usize, p: usize, seed: u64) -> DataMatrix {
    let case = CovariateCase::new(CaseTag::Normal, p);
    simulate(&case, n, &vec![1.0; p + 1], 9.0, ErrorModel::Homoscedastic, StreamKey::new(seed))
        .expect("valid case")
}
