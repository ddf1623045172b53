//! The estimator roster and a single entry point that runs any of them.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::baselines::{
    default_block_count, divide_and_conquer, draw_and_fit, make_plan, BaselineError,
    SubsamplingMethod, DEFAULT_SLEV_ALPHA,
};
use crate::data::DataMatrix;
use crate::estimation::{adjusted_intercept, ols_fit, ols_fit_rows, EstimationError, FitResult};
use crate::select::{full_means, iboss_dopt, SelectionError, SelectionMode, SelectionSpec, Subdata};

/// Consecutive singular subsample draws tolerated before giving up.
pub const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Dopt,
    Uni,
    Lev,
    Slev(f64),
    Levunw,
    /// Divide and conquer; `None` picks `⌊n^{1/4}⌋` blocks.
    Dc(Option<usize>),
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown method `{0}` (expected dopt, uni, lev, slev[(alpha)], levunw, dc[(blocks)] or full)")]
pub struct ParseMethodError(pub String);

impl FromStr for Method {
    type Err = ParseMethodError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseMethodError(s.to_string());
        let t = s.trim().to_ascii_lowercase();
        let (name, arg) = match t.split_once('(') {
            Some((name, rest)) => (name.trim(), Some(rest.strip_suffix(')').ok_or_else(err)?.trim())),
            None => (t.as_str(), None),
        };
        match (name, arg) {
            ("dopt" | "d-opt" | "iboss", None) => Ok(Self::Dopt),
            ("uni", None) => Ok(Self::Uni),
            ("lev", None) => Ok(Self::Lev),
            ("levunw", None) => Ok(Self::Levunw),
            ("full", None) => Ok(Self::Full),
            ("slev", None) => Ok(Self::Slev(DEFAULT_SLEV_ALPHA)),
            ("slev", Some(a)) => {
                let alpha: f64 = a.parse().map_err(|_| err())?;
                if (0.0..=1.0).contains(&alpha) {
                    Ok(Self::Slev(alpha))
                } else {
                    Err(err())
                }
            }
            ("dc", None) => Ok(Self::Dc(None)),
            ("dc", Some(b)) => match b.parse::<usize>() {
                Ok(s) if s > 0 => Ok(Self::Dc(Some(s))),
                _ => Err(err()),
            },
            _ => Err(err()),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Dopt => f.write_str("dopt"),
            Self::Uni => f.write_str("uni"),
            Self::Lev => f.write_str("lev"),
            Self::Slev(a) => write!(f, "slev({a})"),
            Self::Levunw => f.write_str("levunw"),
            Self::Dc(None) => f.write_str("dc"),
            Self::Dc(Some(s)) => write!(f, "dc({s})"),
            Self::Full => f.write_str("full"),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Method {
    pub fn subsampling(&self) -> Option<SubsamplingMethod> {
        match *self {
            Self::Uni => Some(SubsamplingMethod::Uni),
            Self::Lev => Some(SubsamplingMethod::Lev),
            Self::Slev(alpha) => Some(SubsamplingMethod::Slev { alpha }),
            Self::Levunw => Some(SubsamplingMethod::Levunw),
            _ => None,
        }
    }

    /// Whether the method uses the subdata size `k`.
    pub fn uses_k(&self) -> bool {
        !matches!(self, Self::Full | Self::Dc(_))
    }

    pub fn is_random(&self) -> bool {
        self.subsampling().is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MethodError {
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

/// What one estimator run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: Method,
    pub fit: FitResult,
    /// `ȳ − z̄ᵀβ̂₁` from full-data means; set for `dopt`.
    pub adjusted_beta0: Option<f64>,
    /// Rows actually used by the fit (distinct rows for subsampling).
    pub rows_used: usize,
    /// Singular draws discarded before the accepted one.
    pub singular_draws: usize,
    /// The selected subdata, for `dopt`.
    pub subdata: Option<Subdata>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodOptions {
    pub mode: SelectionMode,
    pub with_replacement: bool,
    /// Compute the adjusted intercept for `dopt` (one pass over the data).
    pub adjusted_intercept: bool,
    /// Keep the selected subdata in the outcome.
    pub keep_subdata: bool,
}

impl Default for MethodOptions {
    fn default() -> Self {
        Self {
            mode: SelectionMode::Sequential,
            with_replacement: true,
            adjusted_intercept: true,
            keep_subdata: false,
        }
    }
}

/// Runs `method` on `data` with subdata size `k`.
pub fn estimate<R: Rng + ?Sized>(
    method: Method,
    data: &DataMatrix,
    k: usize,
    opts: &MethodOptions,
    rng: &mut R,
) -> Result<MethodOutcome, MethodError> {
    let outcome = |fit: FitResult, rows_used: usize| MethodOutcome {
        method,
        fit,
        adjusted_beta0: None,
        rows_used,
        singular_draws: 0,
        subdata: None,
    };
    match method {
        Method::Dopt => {
            let sub = iboss_dopt(data, &SelectionSpec::new(k, opts.mode))?;
            let fit = ols_fit(&sub)?;
            let adjusted = if opts.adjusted_intercept {
                let (y_bar, z_bar) = full_means(data);
                Some(adjusted_intercept(&fit.beta1, y_bar, &z_bar)?)
            } else {
                None
            };
            let mut out = outcome(fit, sub.k_eff());
            out.adjusted_beta0 = adjusted;
            if opts.keep_subdata {
                out.subdata = Some(sub);
            }
            Ok(out)
        }
        Method::Full => {
            let mut fit = ols_fit_rows(data.covariates(), data.response(), "full")?;
            fit.method_tag = method.to_string();
            Ok(outcome(fit, data.n()))
        }
        Method::Dc(blocks) => {
            let s = blocks.unwrap_or_else(|| default_block_count(data.n()));
            Ok(outcome(divide_and_conquer(data, s)?, data.n()))
        }
        _ => {
            let sm = method.subsampling().expect("subsampling method");
            let plan = make_plan(data, sm)?.replacement(opts.with_replacement);
            let res = draw_and_fit(data, &plan, k, MAX_REDRAWS, rng)?;
            let mut out = outcome(res.fit, res.draws.entries().len());
            out.singular_draws = res.singular_draws;
            Ok(out)
        }
    }
}
