//! Least-squares fits on subdata and the inference built on them.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix, QrFactor};
use crate::select::Subdata;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimationError {
    #[error("subdata design is rank deficient (column {column})")]
    RankDeficientSubdata { column: usize },
    #[error("need at least {needed} rows to fit {params} parameters, found {found}")]
    TooFewRows {
        needed: usize,
        found: usize,
        params: usize,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
    #[error("standard error must be non-negative, got {0}")]
    InvalidStandardError(f64),
}

impl From<LinalgError> for EstimationError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::RankDeficient { column } => Self::RankDeficientSubdata { column },
            LinalgError::DimensionMismatch { expected, found } => {
                Self::DimensionMismatch { expected, found }
            }
            LinalgError::TooFewRows { needed, found } => Self::TooFewRows {
                needed,
                found,
                params: needed,
            },
            _ => Self::RankDeficientSubdata { column: 0 },
        }
    }
}

/// OLS fit with an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta0: f64,
    pub beta1: Vec<f64>,
    /// Residual sum of squares over `k_eff − p − 1`.
    pub sigma2_hat: f64,
    /// `σ̂² (XᵀX)⁻¹`, (p+1) × (p+1).
    #[serde(with = "matrix_rows")]
    pub cov: Matrix,
    pub se: Vec<f64>,
    pub dof: usize,
    pub method_tag: String,
}

impl FitResult {
    /// `(β₀, β₁ᵀ)ᵀ`.
    pub fn coefficients(&self) -> Vec<f64> {
        std::iter::once(self.beta0)
            .chain(self.beta1.iter().copied())
            .collect()
    }

    pub fn p(&self) -> usize {
        self.beta1.len()
    }
}

pub(crate) mod matrix_rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::linalg::Matrix;

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        m.to_rows().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Fits `y = β₀ + zᵀβ₁ + ε` on the rows of `z` by Householder QR.
pub fn ols_fit_rows(z: &Matrix, y: &[f64], method_tag: &str) -> Result<FitResult, EstimationError> {
    let (k, p) = (z.rows(), z.cols());
    if y.len() != k {
        return Err(EstimationError::DimensionMismatch {
            expected: k,
            found: y.len(),
        });
    }
    if k < p + 2 {
        return Err(EstimationError::TooFewRows {
            needed: p + 2,
            found: k,
            params: p + 1,
        });
    }
    let x = z.with_intercept();
    let qr = QrFactor::new(&x)?;
    let ls = qr.least_squares(y)?;
    let dof = k - p - 1;
    let sigma2_hat = ls.rss / dof as f64;
    let cov = qr.xtx_inverse().scaled(sigma2_hat);
    let se = cov.diag().iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut coef = ls.coef.into_iter();
    Ok(FitResult {
        beta0: coef.next().expect("intercept present"),
        beta1: coef.collect(),
        sigma2_hat,
        cov,
        se,
        dof,
        method_tag: method_tag.to_string(),
    })
}

/// OLS on the selected subdata.
pub fn ols_fit(subdata: &Subdata) -> Result<FitResult, EstimationError> {
    ols_fit_rows(
        subdata.z_star(),
        subdata.y_star(),
        &subdata.provenance().method,
    )
}

/// `ȳ − z̄ᵀβ̂₁`: intercept recovered from full-data means.
pub fn adjusted_intercept(beta1: &[f64], y_bar: f64, z_bar: &[f64]) -> Result<f64, EstimationError> {
    if beta1.len() != z_bar.len() {
        return Err(EstimationError::DimensionMismatch {
            expected: beta1.len(),
            found: z_bar.len(),
        });
    }
    Ok(y_bar - beta1.iter().zip(z_bar).map(|(b, z)| b * z).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Standard normal quantile.
pub fn normal_quantile(prob: f64) -> f64 {
    Normal::standard().inverse_cdf(prob)
}

/// `estimate ± z_{(1+level)/2} · se` with a standard normal critical value.
pub fn confidence_interval(
    estimate: f64,
    se: f64,
    level: f64,
) -> Result<ConfidenceInterval, EstimationError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(EstimationError::InvalidLevel(level));
    }
    if !(se >= 0.0) {
        return Err(EstimationError::InvalidStandardError(se));
    }
    let half = normal_quantile(0.5 * (1.0 + level)) * se;
    Ok(ConfidenceInterval {
        lower: estimate - half,
        upper: estimate + half,
        level,
    })
}

/// Which intercept to use for predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Intercept {
    Fitted,
    Adjusted(f64),
}

/// Mean response `β₀ + z_newᵀβ̂₁` for each row of `z_new`.
pub fn predict_mean(
    fit: &FitResult,
    z_new: &Matrix,
    intercept: Intercept,
) -> Result<Vec<f64>, EstimationError> {
    if z_new.cols() != fit.p() {
        return Err(EstimationError::DimensionMismatch {
            expected: fit.p(),
            found: z_new.cols(),
        });
    }
    let b0 = match intercept {
        Intercept::Fitted => fit.beta0,
        Intercept::Adjusted(v) => v,
    };
    let mut out = z_new.matvec(&fit.beta1)?;
    out.iter_mut().for_each(|v| *v += b0);
    Ok(out)
}
