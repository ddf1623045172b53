//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Runs without the libtest harness so the lines always print. Pass
//! criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 3 7`.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use iboss_cli::io::save_columnar;
use iboss_core::baselines::{divide_and_conquer, draw_and_fit, make_plan, SubsamplingMethod};
use iboss_core::criteria::{
    attainment_ratio, log_d_upper_bound, log_det_xtx, subsampling_lower_bound, variance_bounds,
};
use iboss_core::estimation::{ols_fit, ols_fit_rows};
use iboss_core::methods::{MethodOptions, MAX_REDRAWS};
use iboss_core::select::{full_column_ranges, order_statistic_ranges, quotas};
use iboss_core::simgen::{
    gen_response, run_coverage_experiment, run_mse_experiment, simulate, CaseTag, CovariateCase,
    ErrorModel, ExperimentConfig, MetricTable,
};
use iboss_core::{
    estimate, iboss_dopt, BoundReport, DataMatrix, Matrix, Method, SelectionMode, SelectionSpec,
    StreamKey,
};
use rand::Rng;
use serde_json::Value;

// Seeds, fixed up front.
const SEED_BOUNDS: u64 = 0x1b05_0001;
const SEED_LOGNORMAL_GRID: u64 = 0x1b05_0002;
const SEED_RATE: u64 = 0x1b05_0003;
const SEED_COVERAGE: u64 = 0x1b05_0004;
const SEED_TIMING: u64 = 0x1b05_0006;
const SEED_ORACLE: u64 = 0x1b05_0007;
const SEED_CALIBRATION: u64 = 0x1b05_0008;
const SEED_DETERMINISM: u64 = 0x1b05_0009;

// Tolerances and thresholds.
const EQUALITY_TOL: f64 = 1e-9;
const LOEWNER_REL_TOL: f64 = 1e-3;
const MIN_DOPT_DECREASE: f64 = 0.20;
const MAX_UNI_CHANGE: f64 = 0.20;
const RATE_SLOPE_RANGE: (f64, f64) = (-2.5, -1.5);
const COVERAGE_RANGE: (f64, f64) = (0.93, 0.97);
const MIN_ADJUSTED_GAIN: f64 = 2.0;
const MAX_SELECTION_TIME_RATIO: f64 = 12.0;
const OLS_REL_TOL: f64 = 1e-8;
const DC_REL_TOL: f64 = 1e-12;
const BIAS_MC_SDS: f64 = 3.0;
const SIGMA2_REL_TOL: f64 = 0.05;

const BOUND_BUDGET_SECS: f64 = 300.0;
const GRID_BUDGET_SECS: f64 = 900.0;
const RATE_BUDGET_SECS: f64 = 1200.0;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json_str(json).expect("acceptance config is valid")
}

fn value(t: &MetricTable, method: &str, n: usize, k: usize, metric: &str) -> Result<f64, String> {
    t.value(method, n, k, metric)
        .ok_or_else(|| format!("missing {metric} for {method} at n={n}, k={k}"))
}

fn ones(p: usize) -> Vec<f64> {
    vec![1.0; p + 1]
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn time_median(repeats: usize, mut f: impl FnMut()) -> f64 {
    median(
        (0..repeats)
            .map(|_| {
                let t = Instant::now();
                f();
                t.elapsed().as_secs_f64()
            })
            .collect(),
    )
}

/// Sample covariance of the rows of `xs`.
fn sample_cov(xs: &[Vec<f64>]) -> Matrix {
    let m = xs.len() as f64;
    let q = xs[0].len();
    let mean: Vec<f64> = (0..q).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / m).collect();
    let mut c = Matrix::zeros(q, q);
    for a in 0..q {
        for b in 0..q {
            c[(a, b)] = xs.iter().map(|x| (x[a] - mean[a]) * (x[b] - mean[b])).sum::<f64>() / (m - 1.0);
        }
    }
    c
}

/// Bound suite on simulated designs plus the exact-equality and UNI
/// covariance checks.
fn criterion_1() -> Check {
    let started = Instant::now();
    let (n, k, runs) = (10_000, 100, 100);
    let mut checked = 0usize;
    for (ci, tag) in CaseTag::ALL.into_iter().enumerate() {
        // the interaction design has a fixed dimension
        let p = if tag == CaseTag::Interactions { 50 } else { 5 };
        let case = CovariateCase::new(tag, p);
        let r = k / (2 * p);
        for run in 0..runs {
            let key = StreamKey::new(SEED_BOUNDS).child(ci as u64).child(run);
            let data = simulate(&case, n, &ones(p), 9.0, ErrorModel::Homoscedastic, key).map_err(err)?;
            let sub = iboss_dopt(&data, &SelectionSpec::new(k, SelectionMode::Sequential)).map_err(err)?;
            let full = full_column_ranges(&data);
            let quant = order_statistic_ranges(&data, r).map_err(err)?;
            let det = BoundReport::log_scalar("det", log_d_upper_bound(&full, sub.k_eff(), 1.0), log_det_xtx(&sub));
            ensure(det.satisfied, format!("{tag} run {run}: log-det bound violated by {}", -det.slack))?;
            let ratio = attainment_ratio(&sub, &full, &quant, r).map_err(err)?;
            ensure(ratio.satisfied, format!("{tag} run {run}: attainment ratio short by {}", -ratio.slack))?;
            for b in variance_bounds(&sub, 9.0, &full, &quant, r).map_err(err)? {
                ensure(b.satisfied, format!("{tag} run {run}: {} violated, slack {}", b.name, b.slack))?;
            }
            checked += 1;
        }
    }

    // p = 1 with ties at both ends: half the subdata at each extreme
    let mut z: Vec<f64> = (0..100).map(|i| 0.05 + 0.9 * ((i * 37) % 100) as f64 / 100.0).collect();
    for i in 0..10 {
        z[i * 10] = 0.0;
        z[i * 10 + 5] = 1.0;
    }
    let eq = DataMatrix::from_columns(vec![z], vec![0.0; 100]).map_err(err)?;
    let sub = iboss_dopt(&eq, &SelectionSpec::new(20, SelectionMode::Sequential)).map_err(err)?;
    let gap = log_d_upper_bound(&full_column_ranges(&eq), 20, 1.0) - log_det_xtx(&sub);
    ensure(gap.abs() <= EQUALITY_TOL, format!("equality case gap {gap:e}"))?;

    // UNI: empirical covariance over sampling and noise, given Z
    let (n, p, k, draws) = (200, 3, 20, 5000);
    let key = StreamKey::new(SEED_BOUNDS).child(99);
    let z = iboss_core::simgen::gen_covariates(&CovariateCase::new(CaseTag::Normal, p), n, key.child(1)).map_err(err)?;
    let base = DataMatrix::new(z.clone(), vec![0.0; n]).map_err(err)?;
    let plan = make_plan(&base, SubsamplingMethod::Uni).map_err(err)?;
    let mut rng = key.child(2).rng();
    let mut estimates = Vec::with_capacity(draws);
    let mut singular = 0usize;
    for d in 0..draws {
        let y = gen_response(&z, &ones(p), 9.0, ErrorModel::Homoscedastic, key.child(3).child(d as u64)).map_err(err)?;
        let data = DataMatrix::new(z.clone(), y).map_err(err)?;
        let res = draw_and_fit(&data, &plan, k, MAX_REDRAWS, &mut rng).map_err(err)?;
        singular += res.singular_draws;
        estimates.push(res.fit.coefficients());
    }
    let p_ok = draws as f64 / (draws + singular) as f64;
    let lower = subsampling_lower_bound(&base, &plan, k, p_ok, 9.0).map_err(err)?;
    let uni = BoundReport::loewner("uni", &sample_cov(&estimates), &lower, LOEWNER_REL_TOL).map_err(err)?;
    ensure(uni.satisfied, format!("UNI covariance minus bound has eigenvalue {}", uni.slack))?;

    let secs = started.elapsed().as_secs_f64();
    ensure(secs <= BOUND_BUDGET_SECS, format!("took {secs:.0} s"))?;
    Ok(format!(
        "{checked} designs within all bounds; equality gap {gap:.1e}; UNI min eigenvalue {:.3e}",
        uni.slack
    ))
}

fn lognormal_grid() -> Result<MetricTable, String> {
    let cfg = config(&format!(
        r#"{{"case": {{"tag": "lognormal", "p": 10}}, "n_grid": [10000, 100000], "k_grid": [500],
            "replications": 100, "methods": ["dopt", "uni"], "seed": {SEED_LOGNORMAL_GRID}}}"#
    ));
    run_mse_experiment(&cfg).map_err(err)
}

/// D-OPT slope MSE falls with n while UNI's does not.
fn criterion_2(grid: &MetricTable, secs: f64) -> Check {
    let (n1, n2) = (10_000, 100_000);
    let d1 = value(grid, "dopt", n1, 500, "mse_slope")?;
    let d2 = value(grid, "dopt", n2, 500, "mse_slope")?;
    let u1 = value(grid, "uni", n1, 500, "mse_slope")?;
    let u2 = value(grid, "uni", n2, 500, "mse_slope")?;
    let detail = format!("dopt {d1:.4e} -> {d2:.4e}, uni {u1:.4e} -> {u2:.4e}");
    ensure(d2 <= (1.0 - MIN_DOPT_DECREASE) * d1, format!("dopt did not fall by 20%: {detail}"))?;
    ensure(((u2 - u1) / u1).abs() < MAX_UNI_CHANGE, format!("uni changed by 20% or more: {detail}"))?;
    ensure(d1 < u1 && d2 < u2, format!("dopt not below uni: {detail}"))?;
    ensure(secs <= GRID_BUDGET_SECS, format!("took {secs:.0} s"))?;
    Ok(format!("{detail} (grid {secs:.1} s)"))
}

/// Log-log slope of the D-OPT slope MSE for t₁ covariates.
fn criterion_3() -> Check {
    let started = Instant::now();
    let cfg = config(&format!(
        r#"{{"runner": "rate-check", "case": {{"tag": "t1", "p": 1}}, "n_grid": [10000, 100000, 1000000],
            "k_grid": [200], "replications": 300, "methods": ["dopt"], "seed": {SEED_RATE}}}"#
    ));
    let t = iboss_core::simgen::rate_check(&cfg).map_err(err)?;
    let slope = value(&t, "dopt", 0, 200, "loglog_slope_mse_slope")?;
    let mses: Vec<String> = cfg
        .n_grid
        .iter()
        .map(|&n| format!("{:.3e}", t.value("dopt", n, 200, "mse_slope").unwrap_or(f64::NAN)))
        .collect();
    let (lo, hi) = RATE_SLOPE_RANGE;
    ensure((lo..=hi).contains(&slope), format!("slope {slope:.3} outside [{lo}, {hi}]; mse {mses:?}"))?;
    let secs = started.elapsed().as_secs_f64();
    ensure(secs <= RATE_BUDGET_SECS, format!("took {secs:.0} s"))?;
    Ok(format!("slope {slope:.3}; mse {}", mses.join(", ")))
}

/// Normal-theory interval coverage for β₁ with 50 exchangeable normals.
fn criterion_4() -> Check {
    let n = 100_000;
    let cfg = config(&format!(
        r#"{{"runner": "coverage", "case": {{"tag": "normal", "p": 50}}, "n_grid": [{n}], "k_grid": [1000],
            "replications": 500, "methods": ["dopt", "full"], "seed": {SEED_COVERAGE}, "target_coef": 1}}"#
    ));
    let t = run_coverage_experiment(&cfg).map_err(err)?;
    let dopt = value(&t, "dopt", n, 1000, "coverage")?;
    let full = value(&t, "full", n, n, "coverage")?;
    let (lo, hi) = COVERAGE_RANGE;
    let detail = format!("dopt {dopt:.3}, full {full:.3}");
    ensure((lo..=hi).contains(&dopt) && (lo..=hi).contains(&full), format!("coverage outside [{lo}, {hi}]: {detail}"))?;
    Ok(detail)
}

/// The adjusted intercept beats the subdata intercept at n = 10⁵.
fn criterion_5(grid: &MetricTable) -> Check {
    let n = 100_000;
    let plain = value(grid, "dopt", n, 500, "mse_beta0")?;
    let adjusted = value(grid, "dopt", n, 500, "mse_beta0_adjusted")?;
    let gain = plain / adjusted;
    ensure(gain >= MIN_ADJUSTED_GAIN, format!("gain {gain:.2} ({plain:.4e} vs {adjusted:.4e})"))?;
    Ok(format!("mse {plain:.4e} -> {adjusted:.4e} ({gain:.1}x)"))
}

/// Selection scales near-linearly in n; D-OPT beats full OLS end to end.
fn criterion_6() -> Check {
    let (p, k) = (50, 1000);
    let case = CovariateCase::new(CaseTag::Normal, p);
    let spec = SelectionSpec::new(k, SelectionMode::Sequential);
    let mut select_secs = BTreeMap::new();
    for n in [500_000usize, 4_000_000] {
        let key = StreamKey::new(SEED_TIMING).child(n as u64);
        let data = simulate(&case, n, &ones(p), 9.0, ErrorModel::Homoscedastic, key).map_err(err)?;
        let s = time_median(3, || {
            iboss_dopt(&data, &spec).expect("selection");
        });
        select_secs.insert(n, s);
    }
    let ratio = select_secs[&4_000_000] / select_secs[&500_000];

    let (n, p) = (500_000, 100);
    let case = CovariateCase::new(CaseTag::Normal, p);
    let data = simulate(&case, n, &ones(p), 9.0, ErrorModel::Homoscedastic, StreamKey::new(SEED_TIMING).child(1))
        .map_err(err)?;
    let opts = MethodOptions::default();
    let mut rng = StreamKey::new(SEED_TIMING).rng();
    let dopt = time_median(3, || {
        estimate(Method::Dopt, &data, k, &opts, &mut rng).expect("dopt fit");
    });
    let full = time_median(3, || {
        estimate(Method::Full, &data, k, &opts, &mut rng).expect("full fit");
    });
    let detail = format!(
        "select {:.3} s -> {:.3} s (ratio {ratio:.2}); p=100: dopt {dopt:.3} s, full {full:.3} s",
        select_secs[&500_000], select_secs[&4_000_000]
    );
    ensure(ratio <= MAX_SELECTION_TIME_RATIO, format!("selection ratio too high: {detail}"))?;
    ensure(dopt < full, format!("dopt not faster: {detail}"))?;
    Ok(detail)
}

/// Numeric order, so `-0.0` ties with `0.0`.
fn num_cmp(a: f64, b: f64) -> std::cmp::Ordering {
    a.partial_cmp(&b).expect("finite values")
}

/// Sequential selection by full sorting of the remaining rows.
fn sort_oracle(cols: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = cols[0].len();
    let mut taken = vec![false; n];
    let mut out = Vec::new();
    for (j, q) in quotas(k, cols.len()).into_iter().enumerate() {
        let mut rows: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
        rows.sort_by(|&a, &b| num_cmp(cols[j][a], cols[j][b]).then(a.cmp(&b)));
        let low: Vec<usize> = rows[..q.lower].to_vec();
        let mut rest: Vec<usize> = rows[q.lower..].to_vec();
        rest.sort_by(|&a, &b| num_cmp(cols[j][b], cols[j][a]).then(a.cmp(&b)));
        for &i in low.iter().chain(&rest[..q.upper]) {
            taken[i] = true;
            out.push(i);
        }
    }
    out.sort_unstable();
    out
}

/// Each column's extremes over all rows, merged.
fn union_oracle(cols: &[Vec<f64>], k: usize) -> Vec<usize> {
    let n = cols[0].len();
    let mut out = Vec::new();
    for (j, q) in quotas(k, cols.len()).into_iter().enumerate() {
        let mut rows: Vec<usize> = (0..n).collect();
        rows.sort_by(|&a, &b| num_cmp(cols[j][a], cols[j][b]).then(a.cmp(&b)));
        let low: Vec<usize> = rows[..q.lower].to_vec();
        let mut rest: Vec<usize> = rows[q.lower..].to_vec();
        rest.sort_by(|&a, &b| num_cmp(cols[j][b], cols[j][a]).then(a.cmp(&b)));
        out.extend(low);
        out.extend_from_slice(&rest[..q.upper]);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Solves the normal equations by Gaussian elimination with partial pivoting.
fn normal_equations(rows: &[usize], cols: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let q = cols.len() + 1;
    let x = |i: usize, a: usize| if a == 0 { 1.0 } else { cols[a - 1][i] };
    let mut m = vec![vec![0.0; q + 1]; q];
    for a in 0..q {
        for b in 0..q {
            m[a][b] = rows.iter().map(|&i| x(i, a) * x(i, b)).sum();
        }
        m[a][q] = rows.iter().map(|&i| x(i, a) * y[i]).sum();
    }
    for c in 0..q {
        let piv = (c..q).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())).unwrap();
        m.swap(c, piv);
        for r in c + 1..q {
            let f = m[r][c] / m[c][c];
            for t in c..=q {
                m[r][t] -= f * m[c][t];
            }
        }
    }
    let mut beta = vec![0.0; q];
    for c in (0..q).rev() {
        let s: f64 = (c + 1..q).map(|t| m[c][t] * beta[t]).sum();
        beta[c] = (m[c][q] - s) / m[c][c];
    }
    beta
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// Selection, subdata OLS and one-block divide and conquer against
/// independent oracles.
fn criterion_7() -> Check {
    let mut rng = StreamKey::new(SEED_ORACLE).rng();
    let (mut worst_ols, mut worst_dc) = (0.0f64, 0.0f64);
    for inst in 0..1000 {
        let p = rng.random_range(1..=5usize);
        let n = rng.random_range((2 * p + 2).max(8)..=200usize);
        let k = rng.random_range((2 * p).max(p + 2)..=n);
        // every fourth instance is coarsely rounded to force ties
        let coarse = inst % 4 == 0;
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| {
                (0..n)
                    .map(|_| {
                        let v: f64 = rng.random_range(-5.0..5.0);
                        if coarse { v.round() } else { v }
                    })
                    .collect()
            })
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 1.0 + cols.iter().enumerate().map(|(j, c)| (j as f64 - 1.5) * c[i]).sum::<f64>() + rng.random_range(-1.0..1.0))
            .collect();
        let data = DataMatrix::from_columns(cols.clone(), y.clone()).map_err(err)?;

        let seq = iboss_dopt(&data, &SelectionSpec::new(k, SelectionMode::Sequential)).map_err(err)?;
        let want = sort_oracle(&cols, k);
        ensure(seq.indices() == want.as_slice(), format!("instance {inst} (n={n}, p={p}, k={k}): sequential selection differs"))?;
        let par = iboss_dopt(&data, &SelectionSpec::new(k, SelectionMode::ParallelMerge)).map_err(err)?;
        ensure(par.indices() == union_oracle(&cols, k).as_slice(), format!("instance {inst}: parallel-merge selection differs"))?;

        if !coarse {
            let fit = ols_fit(&seq).map_err(err)?;
            let e = rel_err(&fit.coefficients(), &normal_equations(seq.indices(), &cols, &y));
            ensure(e <= OLS_REL_TOL, format!("instance {inst}: subdata OLS off by {e:e}"))?;
            worst_ols = worst_ols.max(e);

            let full = ols_fit_rows(data.covariates(), data.response(), "full").map_err(err)?;
            let dc = divide_and_conquer(&data, 1).map_err(err)?;
            let e = rel_err(&dc.coefficients(), &full.coefficients());
            ensure(e <= DC_REL_TOL, format!("instance {inst}: one-block dc off by {e:e}"))?;
            worst_dc = worst_dc.max(e);
        }
    }
    Ok(format!("1000 instances; worst OLS rel err {worst_ols:.1e}, worst dc rel err {worst_dc:.1e}"))
}

/// Noise replicates on one fixed selected design.
fn criterion_8() -> Check {
    let (n, p, k, reps) = (10_000, 5, 200, 2000);
    let key = StreamKey::new(SEED_CALIBRATION);
    let beta = ones(p);
    let data = simulate(&CovariateCase::new(CaseTag::Normal, p), n, &beta, 9.0, ErrorModel::Homoscedastic, key.child(0))
        .map_err(err)?;
    let sub = iboss_dopt(&data, &SelectionSpec::new(k, SelectionMode::Sequential)).map_err(err)?;
    let z = sub.z_star();
    let mut coefs = Vec::with_capacity(reps);
    let mut s2 = Vec::with_capacity(reps);
    for r in 0..reps {
        let y = gen_response(z, &beta, 9.0, ErrorModel::Homoscedastic, key.child(1).child(r as u64)).map_err(err)?;
        let fit = ols_fit_rows(z, &y, "dopt").map_err(err)?;
        coefs.push(fit.coefficients());
        s2.push(fit.sigma2_hat);
    }
    let m = reps as f64;
    let mut worst = 0.0f64;
    for j in 0..=p {
        let mean = coefs.iter().map(|c| c[j]).sum::<f64>() / m;
        let sd = (coefs.iter().map(|c| (c[j] - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
        let z_score = (mean - beta[j]).abs() / (sd / m.sqrt());
        ensure(z_score <= BIAS_MC_SDS, format!("coefficient {j}: bias is {z_score:.2} MC sd"))?;
        worst = worst.max(z_score);
    }
    let mean_s2 = s2.iter().sum::<f64>() / m;
    ensure(
        (mean_s2 - 9.0).abs() <= SIGMA2_REL_TOL * 9.0,
        format!("mean sigma2_hat {mean_s2:.3}"),
    )?;
    Ok(format!("largest bias {worst:.2} MC sd; mean sigma2_hat {mean_s2:.3}"))
}

fn run_bin(args: &[&str], threads: Option<usize>) -> Result<std::process::Output, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_iboss"));
    cmd.args(args).env_remove("IBOSS_THREADS");
    if let Some(t) = threads {
        cmd.env("IBOSS_THREADS", t.to_string());
    }
    let o = cmd.output().map_err(err)?;
    ensure(
        o.status.success(),
        format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr)),
    )?;
    Ok(o)
}

fn read(p: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn without_timing(text: &[u8]) -> Result<Value, String> {
    let mut v: Value = serde_json::from_slice(text).map_err(err)?;
    v.as_object_mut().ok_or("report is not an object")?.remove("timing");
    Ok(v)
}

/// Re-runs the command echoed in `report` with its output directory swapped
/// for `out` (when it has one) and returns stdout.
fn replay(report: &Value, out: Option<&Path>, threads: Option<usize>) -> Result<Vec<u8>, String> {
    let mut args: Vec<String> = report["command"]
        .as_array()
        .ok_or("no echoed command")?
        .iter()
        .skip(1)
        .map(|v| v.as_str().unwrap_or_default().to_string())
        .collect();
    if let Some(out) = out {
        let at = args.iter().position(|a| a == "--out").ok_or("no --out in echoed command")?;
        args[at + 1] = out.display().to_string();
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    Ok(run_bin(&refs, threads)?.stdout)
}

/// Seeded replay through the binary, and selection under several pool sizes.
fn criterion_9() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let root = dir.path();
    let key = StreamKey::new(SEED_DETERMINISM);
    let data = simulate(&CovariateCase::new(CaseTag::Mixture, 6), 50_000, &ones(6), 9.0, ErrorModel::Homoscedastic, key)
        .map_err(err)?;
    let input = root.join("data.ibos");
    save_columnar(&input, &data).map_err(err)?;
    let input = input.to_str().unwrap();

    let mut compared = 0;
    for mode in ["sequential", "parallel-merge"] {
        let mut first: Option<(Vec<u8>, Vec<u8>)> = None;
        for threads in [1usize, 2, 8] {
            let out = root.join(format!("sel-{mode}-{threads}"));
            run_bin(
                &["select", "--input", input, "--format", "f64le-columnar", "--k", "600", "--mode", mode, "--out", out.to_str().unwrap()],
                Some(threads),
            )?;
            let got = (read(&out.join("indices.txt"))?, read(&out.join("subdata.csv"))?);
            match &first {
                None => first = Some(got),
                Some(f) => ensure(*f == got, format!("{mode} selection differs with {threads} threads"))?,
            }
            compared += 1;
        }
    }

    for method in ["uni", "lev", "slev", "levunw"] {
        let o = run_bin(&["fit", "--input", input, "--format", "f64le-columnar", "--method", method, "--k", "300", "--seed", "77"], None)?;
        let report: Value = serde_json::from_slice(&o.stdout).map_err(err)?;
        ensure(report["seed"] == 77, format!("{method}: seed not echoed"))?;
        let again = replay(&report, None, Some(8))?;
        ensure(without_timing(&o.stdout)? == without_timing(&again)?, format!("{method}: replay differs"))?;
        compared += 1;
    }

    let cfg = root.join("exp.json");
    std::fs::write(
        &cfg,
        r#"{"case": {"tag": "t2", "p": 4}, "n_grid": [5000, 20000], "k_grid": [80], "replications": 6,
            "methods": ["dopt", "uni", "slev(0.5)", "dc"], "seed": 4242}"#,
    )
    .map_err(err)?;
    let first = root.join("exp-1");
    run_bin(&["experiment", "--config", cfg.to_str().unwrap(), "--out", first.to_str().unwrap()], Some(1))?;
    let report: Value = serde_json::from_slice(&read(&first.join("report.json"))?).map_err(err)?;
    ensure(report["seed"] == 4242, "experiment seed not echoed")?;
    let second = root.join("exp-8");
    replay(&report, Some(&second), Some(8))?;
    for f in ["metrics.csv", "metrics.json"] {
        ensure(read(&first.join(f))? == read(&second.join(f))?, format!("experiment {f} differs on replay"))?;
    }
    let a = without_timing(&read(&first.join("report.json"))?)?;
    let b = without_timing(&read(&second.join("report.json"))?)?;
    ensure(a["results"] == b["results"] && a["config"] == b["config"], "experiment report differs on replay")?;
    compared += 1;

    Ok(format!("{compared} comparisons identical"))
}

type Grid = (Result<MetricTable, String>, f64);

fn grid_once(cache: &mut Option<Grid>) -> Grid {
    cache
        .get_or_insert_with(|| {
            let t = Instant::now();
            let g = catch_unwind(lognormal_grid).unwrap_or_else(|_| Err("grid run panicked".into()));
            (g, t.elapsed().as_secs_f64())
        })
        .clone()
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let selected = |c: u32| wanted.is_empty() || wanted.contains(&c);
    let mut failures = 0;

    let mut report = |num: u32, name: &str, f: &mut dyn FnMut() -> Check| {
        if !selected(num) {
            return;
        }
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| f())).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[PASS] criterion {num} ({name}): {detail} [{secs:.1} s]"),
            Err(why) => {
                failures += 1;
                println!("[FAIL] criterion {num} ({name}): {why} [{secs:.1} s]");
            }
        }
    };

    report(1, "bound suite", &mut criterion_1);

    // criteria 2 and 5 share one simulation grid
    let mut grid: Option<Grid> = None;
    if selected(2) || selected(5) {
        let _ = grid_once(&mut grid);
    }
    report(2, "slope MSE vs n, lognormal", &mut || {
        let (g, secs) = grid_once(&mut grid);
        criterion_2(&g?, secs)
    });
    report(3, "t1 convergence rate", &mut criterion_3);
    report(4, "interval coverage", &mut criterion_4);
    report(5, "adjusted intercept", &mut || criterion_5(&grid_once(&mut grid).0?));
    report(6, "timing", &mut criterion_6);
    report(7, "oracle equivalence", &mut criterion_7);
    report(8, "estimator calibration", &mut criterion_8);
    report(9, "determinism", &mut criterion_9);

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
