//! Monte Carlo experiment runners.
//!
//! Replications run in parallel on independent streams; their results are
//! collected in replication order and reduced sequentially, so a table is
//! bit-identical across runs and thread counts.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::cases::{gen_covariates, CovariateCase};
use super::config::{ExperimentConfig, RunnerKind};
use super::metrics::{mean_stderr, MetricTable};
use super::response::simulate;
use super::rng::{label, StreamKey};
use super::SimError;
use crate::data::DataMatrix;
use crate::estimation::{confidence_interval, ols_fit_rows};
use crate::methods::{estimate, Method, MethodOptions, MethodOutcome};
use crate::select::{iboss_dopt, SelectionSpec};

fn options(cfg: &ExperimentConfig) -> MethodOptions {
    MethodOptions {
        mode: cfg.mode,
        with_replacement: cfg.with_replacement,
        adjusted_intercept: true,
        keep_subdata: false,
    }
}

/// The `k` a method's row is filed under: its subdata size, or `n` for
/// methods that use all rows.
fn k_label(method: Method, n: usize, k: usize) -> usize {
    if method.uses_k() {
        k
    } else {
        n
    }
}

/// `(method index, k)` cells of a replication; methods that ignore `k` get
/// a single cell.
fn cells(methods: &[Method], k_grid: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (mi, m) in methods.iter().enumerate() {
        if m.uses_k() {
            out.extend(k_grid.iter().map(|&k| (mi, k)));
        } else {
            out.push((mi, k_grid[0]));
        }
    }
    out
}

fn run_cells(
    data: &DataMatrix,
    methods: &[Method],
    k_grid: &[usize],
    opts: &MethodOptions,
    key: StreamKey,
) -> Result<Vec<MethodOutcome>, SimError> {
    cells(methods, k_grid)
        .into_iter()
        .map(|(mi, k)| {
            let mut rng = key.child(label::METHOD).child(mi as u64).child(k as u64).rng();
            Ok(estimate(methods[mi], data, k, opts, &mut rng)?)
        })
        .collect()
}

fn replication_key(cfg: &ExperimentConfig, n: usize, rep: usize) -> StreamKey {
    StreamKey::new(cfg.seed)
        .child(label::GRID)
        .child(n as u64)
        .child(label::REPLICATION)
        .child(rep as u64)
}

/// Runs every replication for one `n`, returning per-replication outcomes in
/// order.
fn replicate<T, F>(cfg: &ExperimentConfig, n: usize, per_rep: F) -> Result<Vec<T>, SimError>
where
    T: Send,
    F: Fn(&DataMatrix, StreamKey) -> Result<T, SimError> + Sync,
{
    let beta = cfg.beta();
    (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let key = replication_key(cfg, n, rep);
            let data = simulate(&cfg.case, n, &beta, cfg.sigma2, cfg.error_model, key)?;
            per_rep(&data, key)
        })
        .collect()
}

fn sq(x: f64) -> f64 {
    x * x
}

fn slope_sq_error(beta1_hat: &[f64], beta1: &[f64]) -> f64 {
    beta1_hat.iter().zip(beta1).map(|(a, b)| sq(a - b)).sum()
}

/// Empirical MSEs of the intercept (plain and, for `dopt`, adjusted) and of
/// the slope vector.
pub fn run_mse_experiment(cfg: &ExperimentConfig) -> Result<MetricTable, SimError> {
    let beta = cfg.beta();
    let opts = options(cfg);
    let cells = cells(&cfg.methods, &cfg.k_grid);
    let mut table = MetricTable::new();
    for &n in &cfg.n_grid {
        let reps = replicate(cfg, n, |data, key| run_cells(data, &cfg.methods, &cfg.k_grid, &opts, key))?;
        for (ci, &(mi, k)) in cells.iter().enumerate() {
            let m = cfg.methods[mi];
            let outs: Vec<&MethodOutcome> = reps.iter().map(|r| &r[ci]).collect();
            let name = m.to_string();
            let kl = k_label(m, n, k);
            let b0: Vec<f64> = outs.iter().map(|o| sq(o.fit.beta0 - beta[0])).collect();
            let (v, s) = mean_stderr(&b0);
            table.push(&name, n, kl, "mse_beta0", v, s);
            if outs.iter().all(|o| o.adjusted_beta0.is_some()) {
                let adj: Vec<f64> = outs
                    .iter()
                    .map(|o| sq(o.adjusted_beta0.unwrap_or(f64::NAN) - beta[0]))
                    .collect();
                let (v, s) = mean_stderr(&adj);
                table.push(&name, n, kl, "mse_beta0_adjusted", v, s);
            }
            let slope: Vec<f64> = outs.iter().map(|o| slope_sq_error(&o.fit.beta1, &beta[1..])).collect();
            let (v, s) = mean_stderr(&slope);
            table.push(&name, n, kl, "mse_slope", v, s);
            if m.is_random() {
                let singular: usize = outs.iter().map(|o| o.singular_draws).sum();
                let rate = singular as f64 / (singular + outs.len()) as f64;
                table.push(&name, n, kl, "singular_draw_rate", rate, None);
            }
        }
    }
    Ok(table)
}

/// Coverage and mean length of the normal-theory interval for
/// `cfg.target_coef`.
pub fn run_coverage_experiment(cfg: &ExperimentConfig) -> Result<MetricTable, SimError> {
    let beta = cfg.beta();
    let target = cfg.target_coef;
    let truth = beta[target];
    let opts = options(cfg);
    let cells = cells(&cfg.methods, &cfg.k_grid);
    let mut table = MetricTable::new();
    for &n in &cfg.n_grid {
        let reps = replicate(cfg, n, |data, key| {
            run_cells(data, &cfg.methods, &cfg.k_grid, &opts, key)?
                .into_iter()
                .map(|o| {
                    let est = o.fit.coefficients()[target];
                    let ci = confidence_interval(est, o.fit.se[target], cfg.level)
                        .map_err(crate::methods::MethodError::from)?;
                    Ok((ci.contains(truth), ci.length()))
                })
                .collect::<Result<Vec<_>, SimError>>()
        })?;
        for (ci, &(mi, k)) in cells.iter().enumerate() {
            let m = cfg.methods[mi];
            let hits: Vec<f64> = reps.iter().map(|r| if r[ci].0 { 1.0 } else { 0.0 }).collect();
            let lens: Vec<f64> = reps.iter().map(|r| r[ci].1).collect();
            let cov = hits.iter().sum::<f64>() / hits.len() as f64;
            let cov_se = (cov * (1.0 - cov) / hits.len() as f64).sqrt();
            let (len, len_se) = mean_stderr(&lens);
            let name = m.to_string();
            let kl = k_label(m, n, k);
            table.push(&name, n, kl, "coverage", cov, Some(cov_se));
            table.push(&name, n, kl, "ci_length", len, len_se);
        }
    }
    Ok(table)
}

/// Mean squared error of the estimated mean response at `cfg.n_new` fresh
/// rows per replication. `dopt` predicts with the adjusted intercept.
pub fn run_mspe_experiment(cfg: &ExperimentConfig) -> Result<MetricTable, SimError> {
    let beta = cfg.beta();
    let opts = options(cfg);
    let cells = cells(&cfg.methods, &cfg.k_grid);
    let mut table = MetricTable::new();
    for &n in &cfg.n_grid {
        let reps = replicate(cfg, n, |data, key| {
            let z_new = gen_covariates(&cfg.case, cfg.n_new, key.child(label::NEW_ROWS))?;
            let outs = run_cells(data, &cfg.methods, &cfg.k_grid, &opts, key)?;
            Ok(outs
                .iter()
                .map(|o| {
                    let b0 = o.adjusted_beta0.unwrap_or(o.fit.beta0);
                    let mut diff: Vec<f64> = vec![b0 - beta[0]; cfg.n_new];
                    for j in 0..z_new.cols() {
                        let d = o.fit.beta1[j] - beta[j + 1];
                        diff.iter_mut().zip(z_new.col(j)).for_each(|(a, z)| *a += d * z);
                    }
                    diff.iter().map(|d| d * d).sum::<f64>() / cfg.n_new as f64
                })
                .collect::<Vec<f64>>())
        })?;
        for (ci, &(mi, k)) in cells.iter().enumerate() {
            let m = cfg.methods[mi];
            let vals: Vec<f64> = reps.iter().map(|r| r[ci]).collect();
            let (v, s) = mean_stderr(&vals);
            table.push(m.to_string(), n, k_label(m, n, k), "mspe", v, s);
        }
    }
    Ok(table)
}

/// Bootstrap MSEs: each of `b` resamples of size `n` (uniform, with
/// replacement) is analysed by every method, and the squared errors are
/// taken around the full-data OLS estimate of the original data.
pub fn bootstrap_mse(
    data: &DataMatrix,
    methods: &[Method],
    k_grid: &[usize],
    b: usize,
    seed: u64,
    opts: &MethodOptions,
) -> Result<MetricTable, SimError> {
    if b < 2 {
        return Err(SimError::InvalidCase("bootstrap needs at least two resamples".into()));
    }
    if k_grid.is_empty() {
        return Err(SimError::InvalidCase("k grid must not be empty".into()));
    }
    let n = data.n();
    let reference = ols_fit_rows(data.covariates(), data.response(), "full")
        .map_err(crate::methods::MethodError::from)?;
    let root = StreamKey::new(seed).child(label::BOOTSTRAP);
    let reps: Vec<Vec<MethodOutcome>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let key = root.child(i as u64);
            let mut rng = key.child(label::NEW_ROWS).rng();
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let resampled = data.resample(&idx);
            run_cells(&resampled, methods, k_grid, opts, key)
        })
        .collect::<Result<_, _>>()?;
    let mut table = MetricTable::new();
    for (ci, &(mi, k)) in cells(methods, k_grid).iter().enumerate() {
        let m = methods[mi];
        let slope: Vec<f64> = reps.iter().map(|r| slope_sq_error(&r[ci].fit.beta1, &reference.beta1)).collect();
        let b0: Vec<f64> = reps.iter().map(|r| sq(r[ci].fit.beta0 - reference.beta0)).collect();
        let name = m.to_string();
        let kl = k_label(m, n, k);
        let (v, s) = mean_stderr(&b0);
        table.push(&name, n, kl, "mse_beta0", v, s);
        let (v, s) = mean_stderr(&slope);
        table.push(&name, n, kl, "mse_slope", v, s);
    }
    Ok(table)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

fn time_it<F: FnMut() -> Result<(), SimError>>(repeats: usize, mut f: F) -> Result<f64, SimError> {
    let mut secs = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t = Instant::now();
        f()?;
        secs.push(t.elapsed().as_secs_f64());
    }
    Ok(median(secs))
}

/// Wall-clock seconds (median of `repeats` runs) for each method end to end
/// on one generated dataset per `(n, p)`, plus `dopt_select` for the
/// selection step alone. Metric names carry `p`, e.g. `seconds_p50`.
#[allow(clippy::too_many_arguments)]
pub fn timing_benchmark(
    case: &CovariateCase,
    n_grid: &[usize],
    p_grid: &[usize],
    k: usize,
    methods: &[Method],
    repeats: usize,
    seed: u64,
    opts: &MethodOptions,
) -> Result<MetricTable, SimError> {
    let mut table = MetricTable::new();
    for &p in p_grid {
        let mut case = case.clone();
        case.p = p;
        let beta = vec![1.0; p + 1];
        for &n in n_grid {
            let key = StreamKey::new(seed).child(label::GRID).child(n as u64).child(p as u64);
            let data = simulate(&case, n, &beta, 9.0, Default::default(), key)?;
            let metric = format!("seconds_p{p}");
            if methods.contains(&Method::Dopt) {
                let spec = SelectionSpec::new(k, opts.mode);
                let s = time_it(repeats, || {
                    iboss_dopt(&data, &spec).map_err(crate::methods::MethodError::from)?;
                    Ok(())
                })?;
                table.push("dopt_select", n, k, &metric, s, None);
            }
            for (mi, &m) in methods.iter().enumerate() {
                let mut rng = key.child(label::METHOD).child(mi as u64).rng();
                let s = time_it(repeats, || {
                    estimate(m, &data, k, opts, &mut rng)?;
                    Ok(())
                })?;
                table.push(m.to_string(), n, k_label(m, n, k), &metric, s, None);
            }
            drop(data);
        }
    }
    Ok(table)
}

/// Least-squares slope of `log y` on `log x`, with its standard error when
/// there are more than two points.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> (f64, Option<f64>) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|a| sq(a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if lx.len() < 3 {
        return (slope, None);
    }
    let rss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| sq(b - my - slope * (a - mx)))
        .sum();
    (slope, Some((rss / (m - 2.0) / sxx).sqrt()))
}

/// MSE experiment plus, per method and `k`, the log-log slope of the slope
/// MSE against `n` (filed with `n = 0`).
pub fn rate_check(cfg: &ExperimentConfig) -> Result<MetricTable, SimError> {
    let mut table = run_mse_experiment(cfg)?;
    let mut extra = MetricTable::new();
    for m in &cfg.methods {
        let ks: Vec<usize> = if m.uses_k() { cfg.k_grid.clone() } else { vec![0] };
        for k in ks {
            let (ns, vals): (Vec<f64>, Vec<f64>) = cfg
                .n_grid
                .iter()
                .filter_map(|&n| {
                    let kl = if k == 0 { n } else { k };
                    table.value(&m.to_string(), n, kl, "mse_slope").map(|v| (n as f64, v))
                })
                .unzip();
            if ns.len() >= 2 {
                let (s, se) = loglog_slope(&ns, &vals);
                extra.push(m.to_string(), 0, k, "loglog_slope_mse_slope", s, se);
            }
        }
    }
    table.extend(extra);
    Ok(table)
}

/// Runs the runner named in `cfg`. `dataset` feeds the bootstrap runner;
/// without it a dataset is simulated from the configured case.
pub fn run_experiment(cfg: &ExperimentConfig, dataset: Option<&DataMatrix>) -> Result<MetricTable, SimError> {
    match cfg.runner {
        RunnerKind::Mse => run_mse_experiment(cfg),
        RunnerKind::Coverage => run_coverage_experiment(cfg),
        RunnerKind::Mspe => run_mspe_experiment(cfg),
        RunnerKind::RateCheck => rate_check(cfg),
        RunnerKind::Timing => timing_benchmark(
            &cfg.case,
            &cfg.n_grid,
            &cfg.p_grid(),
            cfg.k_grid[0],
            &cfg.methods,
            cfg.timing_repeats,
            cfg.seed,
            &options(cfg),
        ),
        RunnerKind::Bootstrap => {
            let simulated;
            let data = match dataset {
                Some(d) => d,
                None => {
                    let key = StreamKey::new(cfg.seed).child(label::GRID);
                    simulated = simulate(&cfg.case, cfg.n_grid[0], &cfg.beta(), cfg.sigma2, cfg.error_model, key)?;
                    &simulated
                }
            };
            bootstrap_mse(data, &cfg.methods, &cfg.k_grid, cfg.replications, cfg.seed, &options(cfg))
        }
    }
}
