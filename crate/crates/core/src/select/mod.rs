//! D-optimality-motivated subdata selection.
//!
//! For each covariate in turn the rows holding its smallest and largest
//! values are taken into the subdata. In [`SelectionMode::Sequential`] rows
//! already taken by an earlier covariate are excluded before the next
//! covariate is processed, so the subdata has exactly `k` rows. In
//! [`SelectionMode::ParallelMerge`] every covariate is processed on its own
//! and the per-covariate index sets are merged by union, which can yield fewer
//! than `k` rows.
//!
//! Ties between equal covariate values always go to the lower row index.

mod introselect;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use introselect::select_nth_by;

use crate::data::DataMatrix;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("subdata size k={k} must satisfy 2p={two_p} <= k <= n={n}")]
    InvalidSize { k: usize, two_p: usize, n: usize },
    #[error("column {column}: need {needed} rows but only {available} remain")]
    InsufficientRows {
        column: usize,
        needed: usize,
        available: usize,
    },
    #[error("order statistic rank {rank} out of range for n={n}")]
    InvalidRank { rank: usize, n: usize },
    #[error("row index {index} out of range for n={n}")]
    IndexOutOfRange { index: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Smallest,
    Largest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    #[default]
    Sequential,
    ParallelMerge,
}

impl std::str::FromStr for SelectionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" => Ok(Self::Sequential),
            "parallel" | "parallel-merge" => Ok(Self::ParallelMerge),
            other => Err(format!("unknown selection mode `{other}`")),
        }
    }
}

/// Number of rows a covariate contributes from each tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quota {
    pub lower: usize,
    pub upper: usize,
}

/// Quota rule, echoed into provenance.
pub const QUOTA_RULE: &str = "floor(k/2p) per side; remainder assigned one pick at a time \
     in the order (col1 lower, col1 upper, col2 lower, ...)";

/// Per-column quotas summing to `k`. Requires `p ≥ 1`.
pub fn quotas(k: usize, p: usize) -> Vec<Quota> {
    let base = k / (2 * p);
    let mut out = vec![
        Quota {
            lower: base,
            upper: base,
        };
        p
    ];
    for pick in 0..(k - 2 * p * base) {
        let q = &mut out[pick / 2];
        if pick % 2 == 0 {
            q.lower += 1;
        } else {
            q.upper += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionSpec {
    pub k: usize,
    #[serde(default)]
    pub mode: SelectionMode,
}

impl SelectionSpec {
    pub fn new(k: usize, mode: SelectionMode) -> Self {
        Self { k, mode }
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<(), SelectionError> {
        if p == 0 || self.k < 2 * p || self.k > n {
            return Err(SelectionError::InvalidSize {
                k: self.k,
                two_p: 2 * p,
                n,
            });
        }
        Ok(())
    }
}

/// Where a subdata set came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<SelectionMode>,
    pub k_requested: usize,
    pub k_eff: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub quotas: Vec<Quota>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quota_rule: Option<String>,
}

/// Selected rows of the full data, materialized.
#[derive(Debug, Clone, PartialEq)]
pub struct Subdata {
    indices: Vec<usize>,
    z_star: Matrix,
    y_star: Vec<f64>,
    provenance: Provenance,
}

impl Subdata {
    /// Materializes rows `indices` of `data`. Indices are sorted and
    /// de-duplicated.
    pub fn from_indices(
        data: &DataMatrix,
        mut indices: Vec<usize>,
        method: &str,
    ) -> Result<Self, SelectionError> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&bad) = indices.iter().find(|&&i| i >= data.n()) {
            return Err(SelectionError::IndexOutOfRange {
                index: bad,
                n: data.n(),
            });
        }
        let k = indices.len();
        Ok(Self::materialize(
            data,
            indices,
            Provenance {
                method: method.to_string(),
                mode: None,
                k_requested: k,
                k_eff: k,
                quotas: Vec::new(),
                quota_rule: None,
            },
        ))
    }

    fn materialize(data: &DataMatrix, indices: Vec<usize>, provenance: Provenance) -> Self {
        let (z_star, y_star) = data.take_rows(&indices);
        Self {
            indices,
            z_star,
            y_star,
            provenance,
        }
    }

    /// Strictly increasing row numbers into the full data.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn z_star(&self) -> &Matrix {
        &self.z_star
    }

    pub fn y_star(&self) -> &[f64] {
        &self.y_star
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn k_eff(&self) -> usize {
        self.indices.len()
    }

    pub fn p(&self) -> usize {
        self.z_star.cols()
    }
}

#[inline]
fn lower_first(a: &(f64, usize), b: &(f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

#[inline]
fn upper_first(a: &(f64, usize), b: &(f64, usize)) -> bool {
    a.0 > b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Moves the `count` most extreme entries of `buf` to its front.
fn take_extremes(buf: &mut [(f64, usize)], count: usize, side: Side) {
    if count == 0 || count >= buf.len() {
        return;
    }
    match side {
        Side::Smallest => select_nth_by(buf, count - 1, lower_first),
        Side::Largest => select_nth_by(buf, count - 1, upper_first),
    }
}

/// Picks `quota.lower` smallest then `quota.upper` largest among the rows not
/// flagged in `excluded`, using `buf` as scratch. Returns the chosen rows.
fn select_column(
    column: &[f64],
    j: usize,
    quota: Quota,
    excluded: Option<&[bool]>,
    buf: &mut Vec<(f64, usize)>,
) -> Result<Vec<usize>, SelectionError> {
    buf.clear();
    match excluded {
        Some(mask) => buf.extend(
            column
                .iter()
                .enumerate()
                .filter(|(i, _)| !mask[*i])
                .map(|(i, &v)| (v, i)),
        ),
        None => buf.extend(column.iter().enumerate().map(|(i, &v)| (v, i))),
    }
    let needed = quota.lower + quota.upper;
    if buf.len() < needed {
        return Err(SelectionError::InsufficientRows {
            column: j,
            needed,
            available: buf.len(),
        });
    }
    take_extremes(buf, quota.lower, Side::Smallest);
    let (low, rest) = buf.split_at_mut(quota.lower);
    take_extremes(rest, quota.upper, Side::Largest);
    Ok(low
        .iter()
        .chain(&rest[..quota.upper])
        .map(|&(_, i)| i)
        .collect())
}

/// Indices (ascending) of the `r` most extreme values of `column` on `side`,
/// skipping rows flagged in `excluded`. `excluded` may be empty, meaning no
/// exclusions.
pub fn partial_extreme_indices(
    column: &[f64],
    r: usize,
    side: Side,
    excluded: &[bool],
) -> Result<Vec<usize>, SelectionError> {
    let quota = match side {
        Side::Smallest => Quota { lower: r, upper: 0 },
        Side::Largest => Quota { lower: 0, upper: r },
    };
    let mask = (!excluded.is_empty()).then_some(excluded);
    let mut buf = Vec::with_capacity(column.len());
    let mut out = select_column(column, 0, quota, mask, &mut buf)?;
    out.sort_unstable();
    Ok(out)
}

/// Runs the selection described by `spec` on `data`.
///
/// The result depends only on `data` and `spec`; parallel-merge mode uses the
/// current rayon pool but merges by sorted union.
pub fn iboss_dopt(data: &DataMatrix, spec: &SelectionSpec) -> Result<Subdata, SelectionError> {
    let (n, p) = (data.n(), data.p());
    spec.validate(n, p)?;
    let quotas = quotas(spec.k, p);

    let indices = match spec.mode {
        SelectionMode::Sequential => {
            let mut excluded = vec![false; n];
            let mut buf = Vec::with_capacity(n);
            let mut chosen = Vec::with_capacity(spec.k);
            for (j, &quota) in quotas.iter().enumerate() {
                let picked = select_column(data.column(j), j, quota, Some(&excluded), &mut buf)?;
                for &i in &picked {
                    excluded[i] = true;
                }
                chosen.extend(picked);
            }
            chosen.sort_unstable();
            chosen
        }
        SelectionMode::ParallelMerge => {
            let per_column: Vec<Vec<usize>> = quotas
                .par_iter()
                .enumerate()
                .map(|(j, &quota)| {
                    let mut buf = Vec::with_capacity(n);
                    select_column(data.column(j), j, quota, None, &mut buf)
                })
                .collect::<Result<_, _>>()?;
            let mut merged: Vec<usize> = per_column.into_iter().flatten().collect();
            merged.sort_unstable();
            merged.dedup();
            merged
        }
    };

    let k_eff = indices.len();
    Ok(Subdata::materialize(
        data,
        indices,
        Provenance {
            method: "dopt".to_string(),
            mode: Some(spec.mode),
            k_requested: spec.k,
            k_eff,
            quotas,
            quota_rule: Some(QUOTA_RULE.to_string()),
        },
    ))
}

/// Per-column `(min, max)` in one pass over the data.
pub fn full_column_ranges(data: &DataMatrix) -> Vec<(f64, f64)> {
    (0..data.p())
        .map(|j| {
            data.column(j)
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                })
        })
        .collect()
}

/// Full-data means `(ȳ, z̄)`.
pub fn full_means(data: &DataMatrix) -> (f64, Vec<f64>) {
    let n = data.n() as f64;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / n;
    let z_bar = (0..data.p()).map(|j| mean(data.column(j))).collect();
    (mean(data.response()), z_bar)
}

/// Per-column `(z_(r), z_(n-r+1))`: the r-th smallest and r-th largest value.
pub fn order_statistic_ranges(
    data: &DataMatrix,
    r: usize,
) -> Result<Vec<(f64, f64)>, SelectionError> {
    let n = data.n();
    if r == 0 || r > n {
        return Err(SelectionError::InvalidRank { rank: r, n });
    }
    let mut buf = Vec::with_capacity(n);
    Ok((0..data.p())
        .map(|j| {
            buf.clear();
            buf.extend_from_slice(data.column(j));
            select_nth_by(&mut buf, r - 1, |a, b| a < b);
            let lo = buf[r - 1];
            select_nth_by(&mut buf, n - r, |a, b| a < b);
            (lo, buf[n - r])
        })
        .collect())
}
