//! Random-subsampling estimators (uniform, leverage, shrunk leverage,
//! unweighted leverage) and the divide-and-conquer estimator.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataMatrix;
use crate::estimation::{ols_fit_rows, EstimationError, FitResult};
use crate::linalg::{LinalgError, Matrix, QrFactor};

/// Default shrinkage for SLEV.
pub const DEFAULT_SLEV_ALPHA: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("design is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("SLEV alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("subsample size {k} must be at least 1 and at most {n}")]
    InvalidSampleSize { k: usize, n: usize },
    #[error("sampling without replacement needs k·max π ≤ 1, got {max_inclusion}")]
    InfeasibleWithoutReplacement { max_inclusion: f64 },
    #[error("weighted design of the drawn subsample is singular")]
    SingularWeightedDesign,
    #[error("gave up after {0} consecutive singular draws")]
    TooManySingularDraws(usize),
    #[error("block {block} has a rank-deficient design")]
    RankDeficientBlock { block: usize },
    #[error("{blocks} blocks of at least {min_rows} rows do not fit in {n} rows")]
    InvalidBlockCount {
        blocks: usize,
        min_rows: usize,
        n: usize,
    },
    #[error("draw counts cover {found} rows but the plan has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

impl From<LinalgError> for BaselineError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::RankDeficient { column } => Self::RankDeficient { column },
            LinalgError::DimensionMismatch { expected, found } => {
                Self::DimensionMismatch { expected, found }
            }
            other => Self::Estimation(other.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SubsamplingMethod {
    Uni,
    Lev,
    Slev { alpha: f64 },
    Levunw,
}

impl SubsamplingMethod {
    pub fn tag(&self) -> String {
        match self {
            Self::Uni => "uni".into(),
            Self::Lev => "lev".into(),
            Self::Slev { alpha } => format!("slev({alpha})"),
            Self::Levunw => "levunw".into(),
        }
    }

    fn needs_leverage(&self) -> bool {
        !matches!(self, Self::Uni | Self::Slev { alpha: 0.0 })
    }
}

/// Per-row sampling probabilities and estimator weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pi: Vec<f64>,
    weights: Vec<f64>,
    with_replacement: bool,
    method: SubsamplingMethod,
}

impl SamplingPlan {
    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn with_replacement(&self) -> bool {
        self.with_replacement
    }

    pub fn method(&self) -> SubsamplingMethod {
        self.method
    }

    pub fn n(&self) -> usize {
        self.pi.len()
    }

    /// Same probabilities and weights under the other replacement mode.
    pub fn replacement(mut self, with_replacement: bool) -> Self {
        self.with_replacement = with_replacement;
        self
    }
}

/// How many times each row was drawn; stored sparsely as `(row, count)`
/// pairs with increasing rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrawCounts {
    n: usize,
    entries: Vec<(usize, u32)>,
}

impl DrawCounts {
    pub fn from_indices(n: usize, mut rows: Vec<usize>) -> Self {
        rows.sort_unstable();
        let mut entries: Vec<(usize, u32)> = Vec::new();
        for r in rows {
            match entries.last_mut() {
                Some((last, c)) if *last == r => *c += 1,
                _ => entries.push((r, 1)),
            }
        }
        Self { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total(&self) -> usize {
        self.entries.iter().map(|&(_, c)| c as usize).sum()
    }

    pub fn entries(&self) -> &[(usize, u32)] {
        &self.entries
    }

    /// Dense length-`n` count vector.
    pub fn eta(&self) -> Vec<u32> {
        let mut out = vec![0; self.n];
        for &(i, c) in &self.entries {
            out[i] = c;
        }
        out
    }

    /// Distinct rows drawn at least once.
    pub fn rows(&self) -> Vec<usize> {
        self.entries.iter().map(|&(i, _)| i).collect()
    }
}

/// Exact leverage scores of the design `[1, Z]`.
pub fn leverage_scores(data: &DataMatrix) -> Result<Vec<f64>, BaselineError> {
    leverage_scores_design(&data.design())
}

/// Diagonal of the hat matrix of `x`, from the row norms of `X R⁻¹`.
pub fn leverage_scores_design(x: &Matrix) -> Result<Vec<f64>, BaselineError> {
    let qr = QrFactor::new(x)?;
    Ok(qr.row_leverage(x)?)
}

pub fn make_plan(data: &DataMatrix, method: SubsamplingMethod) -> Result<SamplingPlan, BaselineError> {
    let h = if method.needs_leverage() {
        Some(leverage_scores(data)?)
    } else {
        None
    };
    plan_from_leverage(data.n(), data.p(), method, h.as_deref())
}

/// Builds a plan from precomputed leverage scores (`None` is allowed only
/// for methods that ignore them).
pub fn plan_from_leverage(
    n: usize,
    p: usize,
    method: SubsamplingMethod,
    leverage: Option<&[f64]>,
) -> Result<SamplingPlan, BaselineError> {
    if let SubsamplingMethod::Slev { alpha } = method {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(BaselineError::InvalidAlpha(alpha));
        }
    }
    let uniform = 1.0 / n as f64;
    let lev_pi = |i: usize| -> f64 {
        let h = leverage.expect("leverage scores required")[i];
        h / (p + 1) as f64
    };
    let (pi, weights): (Vec<f64>, Vec<f64>) = match method {
        SubsamplingMethod::Uni => (vec![uniform; n], vec![1.0; n]),
        SubsamplingMethod::Lev => (0..n).map(lev_pi).map(|q| (q, 1.0 / q)).unzip(),
        SubsamplingMethod::Slev { alpha } => {
            let mix = |i| {
                let lev = if alpha == 0.0 { 0.0 } else { lev_pi(i) };
                alpha * lev + (1.0 - alpha) * uniform
            };
            (0..n).map(mix).map(|q| (q, 1.0 / q)).unzip()
        }
        SubsamplingMethod::Levunw => ((0..n).map(lev_pi).collect(), vec![1.0; n]),
    };
    Ok(SamplingPlan {
        pi,
        weights,
        with_replacement: true,
        method,
    })
}

/// Draws a subsample of size `k` according to `plan`.
///
/// With replacement each draw is an independent categorical pick. Without
/// replacement, rows are visited in a random order and selected by systematic
/// sampling on the cumulative `k·πᵢ`, which gives inclusion probability
/// exactly `k·πᵢ`.
pub fn draw<R: Rng + ?Sized>(
    plan: &SamplingPlan,
    k: usize,
    rng: &mut R,
) -> Result<DrawCounts, BaselineError> {
    let n = plan.n();
    if k == 0 || (!plan.with_replacement && k > n) {
        return Err(BaselineError::InvalidSampleSize { k, n });
    }
    if plan.with_replacement {
        Ok(DrawCounts::from_indices(n, draw_with_replacement(plan, k, rng)))
    } else {
        draw_systematic(plan, k, rng)
    }
}

fn draw_with_replacement<R: Rng + ?Sized>(plan: &SamplingPlan, k: usize, rng: &mut R) -> Vec<usize> {
    let n = plan.n();
    if plan.method == SubsamplingMethod::Uni {
        return (0..k).map(|_| rng.random_range(0..n)).collect();
    }
    let mut cdf = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &q in &plan.pi {
        acc += q;
        cdf.push(acc);
    }
    (0..k)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(n - 1)
        })
        .collect()
}

fn draw_systematic<R: Rng + ?Sized>(
    plan: &SamplingPlan,
    k: usize,
    rng: &mut R,
) -> Result<DrawCounts, BaselineError> {
    let n = plan.n();
    let kf = k as f64;
    let max_inclusion = plan.pi.iter().fold(0.0f64, |m, &q| m.max(kf * q));
    if max_inclusion > 1.0 + 1e-9 {
        return Err(BaselineError::InfeasibleWithoutReplacement { max_inclusion });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let u: f64 = rng.random();
    let total: f64 = plan.pi.iter().sum();
    let scale = kf / total;

    // Points sit at u, u+1, …, u+k−1; row i is taken when its slice of the
    // cumulative inclusion mass contains one.
    let mut picked = Vec::with_capacity(k);
    let mut before = 0.0f64;
    for (pos, &i) in order.iter().enumerate() {
        let after = if pos + 1 == n {
            kf
        } else {
            before + plan.pi[i] * scale
        };
        let hits = (after - u).floor() - (before - u).floor();
        if hits >= 1.0 && picked.len() < k {
            picked.push(i);
        }
        before = after;
    }
    Ok(DrawCounts::from_indices(n, picked))
}

/// Rows, responses and per-row multipliers `wᵢηᵢ` of a draw.
fn drawn_rows(data: &DataMatrix, eta: &DrawCounts, plan: &SamplingPlan) -> (Matrix, Vec<f64>, Vec<f64>) {
    let rows = eta.rows();
    let (z, y) = data.take_rows(&rows);
    let mult = eta
        .entries()
        .iter()
        .map(|&(i, c)| plan.weights[i] * c as f64)
        .collect();
    (z.with_intercept(), y, mult)
}

fn check_plan(data: &DataMatrix, eta: &DrawCounts, plan: &SamplingPlan) -> Result<(), BaselineError> {
    for found in [eta.n(), plan.n()] {
        if found != data.n() {
            return Err(BaselineError::DimensionMismatch {
                expected: data.n(),
                found,
            });
        }
    }
    Ok(())
}

struct WeightedSolution {
    coef: Vec<f64>,
    qr: QrFactor,
    x: Matrix,
    y: Vec<f64>,
    mult: Vec<f64>,
}

fn solve_weighted(data: &DataMatrix, eta: &DrawCounts, plan: &SamplingPlan) -> Result<WeightedSolution, BaselineError> {
    check_plan(data, eta, plan)?;
    let (x, y, mult) = drawn_rows(data, eta, plan);
    if x.rows() < x.cols() {
        return Err(BaselineError::SingularWeightedDesign);
    }
    let mut xs = x.clone();
    let sw: Vec<f64> = mult.iter().map(|m| m.sqrt()).collect();
    for j in 0..xs.cols() {
        xs.col_mut(j).iter_mut().zip(&sw).for_each(|(v, s)| *v *= s);
    }
    let ys: Vec<f64> = y.iter().zip(&sw).map(|(v, s)| v * s).collect();
    let qr = QrFactor::new(&xs).map_err(|e| match e {
        LinalgError::RankDeficient { .. } => BaselineError::SingularWeightedDesign,
        other => other.into(),
    })?;
    let coef = qr.least_squares(&ys)?.coef;
    Ok(WeightedSolution {
        coef,
        qr,
        x,
        y,
        mult,
    })
}

/// `(Σ wᵢηᵢ xᵢxᵢᵀ)⁻¹ Σ wᵢηᵢ xᵢyᵢ` over the drawn rows.
pub fn weighted_ls(data: &DataMatrix, eta: &DrawCounts, plan: &SamplingPlan) -> Result<Vec<f64>, BaselineError> {
    Ok(solve_weighted(data, eta, plan)?.coef)
}

/// Weighted estimate with a conditional covariance.
///
/// `σ̂²` is the residual mean square over the distinct drawn rows with
/// divisor `m − p − 1`. The covariance is the sandwich
/// `σ̂² A⁻¹ (Σ (wᵢηᵢ)² xᵢxᵢᵀ) A⁻¹` with `A = Σ wᵢηᵢ xᵢxᵢᵀ`, the exact
/// variance of the estimator given the draw under homoscedastic errors.
pub fn weighted_fit(data: &DataMatrix, eta: &DrawCounts, plan: &SamplingPlan) -> Result<FitResult, BaselineError> {
    let sol = solve_weighted(data, eta, plan)?;
    let (m, q) = (sol.x.rows(), sol.x.cols());
    if m < q + 1 {
        return Err(EstimationError::TooFewRows {
            needed: q + 1,
            found: m,
            params: q,
        }
        .into());
    }
    let fitted = sol.x.matvec(&sol.coef)?;
    let rss: f64 = sol.y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    let dof = m - q;
    let sigma2_hat = rss / dof as f64;

    let a_inv = sol.qr.xtx_inverse();
    let mut meat = Matrix::zeros(q, q);
    for i in 0..m {
        let w2 = sol.mult[i] * sol.mult[i];
        for b in 0..q {
            let xb = sol.x[(i, b)] * w2;
            for a in 0..q {
                meat[(a, b)] += sol.x[(i, a)] * xb;
            }
        }
    }
    let cov = a_inv.matmul(&meat)?.matmul(&a_inv)?.scaled(sigma2_hat);
    let cov = symmetrize(cov);
    let se = cov.diag().iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut coef = sol.coef.into_iter();
    Ok(FitResult {
        beta0: coef.next().expect("intercept present"),
        beta1: coef.collect(),
        sigma2_hat,
        cov,
        se,
        dof,
        method_tag: plan.method.tag(),
    })
}

fn symmetrize(mut m: Matrix) -> Matrix {
    for j in 0..m.cols() {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// A successful subsample fit and how many singular draws preceded it.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleFit {
    pub fit: FitResult,
    pub draws: DrawCounts,
    pub singular_draws: usize,
}

/// Draws and fits, redrawing after singular designs up to `max_redraws`
/// times.
pub fn draw_and_fit<R: Rng + ?Sized>(
    data: &DataMatrix,
    plan: &SamplingPlan,
    k: usize,
    max_redraws: usize,
    rng: &mut R,
) -> Result<SubsampleFit, BaselineError> {
    let mut singular = 0;
    loop {
        let eta = draw(plan, k, rng)?;
        match weighted_fit(data, &eta, plan) {
            Ok(fit) => {
                return Ok(SubsampleFit {
                    fit,
                    draws: eta,
                    singular_draws: singular,
                })
            }
            Err(BaselineError::SingularWeightedDesign)
            | Err(BaselineError::Estimation(EstimationError::TooFewRows { .. })) => {
                singular += 1;
                if singular > max_redraws {
                    return Err(BaselineError::TooManySingularDraws(singular));
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// `⌊n^{1/4}⌋`, at least 1.
pub fn default_block_count(n: usize) -> usize {
    let mut s = (n as f64).powf(0.25).floor() as usize;
    // guard against powf rounding at perfect fourth powers
    while (s + 1).pow(4) <= n {
        s += 1;
    }
    while s > 1 && s.pow(4) > n {
        s -= 1;
    }
    s.max(1)
}

/// `S − 1` blocks of `⌊n/S⌋` rows, the last one takes the rest.
pub fn block_sizes(n: usize, blocks: usize) -> Vec<usize> {
    if blocks == 0 {
        return Vec::new();
    }
    let base = n / blocks;
    let mut sizes = vec![base; blocks];
    sizes[blocks - 1] = n - base * (blocks - 1);
    sizes
}

/// Averages the per-block OLS fits over `blocks` contiguous blocks.
///
/// The reported covariance is `S⁻² Σ cov_s` and `σ̂²` is the mean of the
/// block estimates.
pub fn divide_and_conquer(data: &DataMatrix, blocks: usize) -> Result<FitResult, BaselineError> {
    let (n, p) = (data.n(), data.p());
    let min_rows = p + 2;
    if blocks == 0 || n / blocks < min_rows {
        return Err(BaselineError::InvalidBlockCount {
            blocks,
            min_rows,
            n,
        });
    }
    let mut coef = vec![0.0; p + 1];
    let mut cov = Matrix::zeros(p + 1, p + 1);
    let mut sigma2 = 0.0;
    let mut dof = 0;
    let mut start = 0;
    for (b, size) in block_sizes(n, blocks).into_iter().enumerate() {
        let rows: Vec<usize> = (start..start + size).collect();
        start += size;
        let (z, y) = data.take_rows(&rows);
        let fit = ols_fit_rows(&z, &y, "dc").map_err(|e| match e {
            EstimationError::RankDeficientSubdata { .. } => BaselineError::RankDeficientBlock { block: b },
            other => other.into(),
        })?;
        coef.iter_mut()
            .zip(fit.coefficients())
            .for_each(|(a, v)| *a += v);
        for j in 0..p + 1 {
            for i in 0..p + 1 {
                cov[(i, j)] += fit.cov[(i, j)];
            }
        }
        sigma2 += fit.sigma2_hat;
        dof += fit.dof;
    }
    let s = blocks as f64;
    coef.iter_mut().for_each(|v| *v /= s);
    let cov = cov.scaled(1.0 / (s * s));
    let se = cov.diag().iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut it = coef.into_iter();
    Ok(FitResult {
        beta0: it.next().expect("intercept present"),
        beta1: it.collect(),
        sigma2_hat: sigma2 / s,
        cov,
        se,
        dof,
        method_tag: format!("dc({blocks})"),
    })
}
