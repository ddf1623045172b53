//! Responses from the linear model `y = β₀ + Zβ₁ + ε`.

use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cases::{CovariateCase, BLOCK_ROWS};
use super::rng::{label, StreamKey};
use super::{gen_covariates, SimError};
use crate::data::DataMatrix;
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorModel {
    /// `εᵢ ~ N(0, σ²)`.
    #[default]
    Homoscedastic,
    /// `εᵢ ~ N(0, sᵢ²)` with `sᵢ ~ Exp(1)`; `σ²` is not used.
    ExponentialSd,
}

/// `β₀ + Zβ₁ + ε`, with noise drawn block by block from `key`.
pub fn gen_response(
    z: &Matrix,
    beta: &[f64],
    sigma2: f64,
    model: ErrorModel,
    key: StreamKey,
) -> Result<Vec<f64>, SimError> {
    if beta.len() != z.cols() + 1 {
        return Err(SimError::DimensionMismatch {
            expected: z.cols() + 1,
            found: beta.len(),
        });
    }
    if !(sigma2 >= 0.0) {
        return Err(SimError::InvalidCase(format!("sigma2 must be non-negative, got {sigma2}")));
    }
    let mut y = vec![beta[0]; z.rows()];
    for (j, b) in beta[1..].iter().enumerate() {
        y.iter_mut().zip(z.col(j)).for_each(|(yi, zi)| *yi += b * zi);
    }
    let sd = sigma2.sqrt();
    y.par_chunks_mut(BLOCK_ROWS).enumerate().for_each(|(b, chunk)| {
        let mut rng = key.child(b as u64).rng();
        for v in chunk.iter_mut() {
            let scale = match model {
                ErrorModel::Homoscedastic => sd,
                ErrorModel::ExponentialSd => Exp1.sample(&mut rng),
            };
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += scale * e;
        }
    });
    Ok(y)
}

/// A full simulated dataset: covariates from `case`, then responses.
pub fn simulate(
    case: &CovariateCase,
    n: usize,
    beta: &[f64],
    sigma2: f64,
    model: ErrorModel,
    key: StreamKey,
) -> Result<DataMatrix, SimError> {
    let z = gen_covariates(case, n, key.child(label::COVARIATES))?;
    let y = gen_response(&z, beta, sigma2, model, key.child(label::NOISE))?;
    Ok(DataMatrix::new(z, y)?)
}
