use std::path::Path;
use std::time::Instant;

use iboss_core::criteria::{attainment_ratio, log_d_upper_bound, log_det_xtx, variance_bounds};
use iboss_core::estimation::confidence_interval;
use iboss_core::methods::MethodOptions;
use iboss_core::select::{full_column_ranges, order_statistic_ranges};
use iboss_core::simgen::rng::label;
use iboss_core::simgen::{CovariateCase, ExperimentConfig, RunnerKind, SimError, Transform};
use iboss_core::{estimate, iboss_dopt, BaselineError, BoundReport, Method, MethodError, SelectionError, SelectionSpec, StreamKey};
use serde_json::{json, Value};

use crate::io::{load_dataset, write_indices, write_subdata_csv, Dataset, LoadOptions};
use crate::output::OutputSet;
use crate::report::Report;
use crate::{BenchArgs, CliError, Command, DataArgs, ExperimentArgs, FitArgs, SelectArgs};

type Result<T> = std::result::Result<T, CliError>;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Runs `cmd`; returns the report text when it belongs on stdout.
pub(crate) fn dispatch(cmd: &Command, argv: &[String]) -> Result<Option<String>> {
    let started = Instant::now();
    match cmd {
        Command::Select(a) => select(a, argv, started).map(|_| None),
        Command::Fit(a) => fit(a, argv, started),
        Command::Experiment(a) => experiment(a, argv, started).map(|_| None),
        Command::Bench(a) => bench(a, argv, started).map(|_| None),
    }
}

impl DataArgs {
    fn load_options(&self) -> LoadOptions {
        let transform = if !self.log_exclude.is_empty() {
            Transform::LogExcluding {
                columns: self.log_exclude.clone(),
            }
        } else if self.log {
            Transform::Log
        } else {
            Transform::None
        };
        LoadOptions {
            format: self.format,
            response: self.response.clone(),
            transform,
            drop: self.drop.clone(),
        }
    }

    fn load(&self) -> Result<Dataset> {
        load_dataset(&self.input, &self.load_options()).map_err(|e| runtime(format!("{}: {e}", self.input.display())))
    }

    fn echo(&self) -> Value {
        let opts = self.load_options();
        json!({
            "input": self.input.display().to_string(),
            "format": opts.format,
            "response": opts.response,
            "transform": opts.transform,
            "drop": opts.drop,
        })
    }
}

fn check_k(k: usize, lower: usize, n: usize) -> Result<()> {
    if k > n {
        return Err(CliError::Usage(format!("--k {k} exceeds the number of rows n = {n}")));
    }
    if k < lower {
        return Err(CliError::Usage(format!("--k {k} is below the minimum {lower}")));
    }
    Ok(())
}

fn select(a: &SelectArgs, argv: &[String], started: Instant) -> Result<()> {
    let ds = a.data.load()?;
    let (n, p) = (ds.data.n(), ds.data.p());
    check_k(a.k, 2 * p, n)?;
    let sub = iboss_dopt(&ds.data, &SelectionSpec::new(a.k, a.mode)).map_err(runtime)?;

    let mut out = OutputSet::create(&a.out).map_err(runtime)?;
    let mut indices = Vec::new();
    write_indices(&mut indices, sub.indices()).map_err(runtime)?;
    out.write("indices.txt", indices).map_err(runtime)?;
    let mut csv = Vec::new();
    write_subdata_csv(&mut csv, &sub, &ds.covariate_names, &ds.response_name).map_err(runtime)?;
    out.write("subdata.csv", csv).map_err(runtime)?;

    let mut config = a.data.echo();
    config["k"] = json!(a.k);
    config["mode"] = json!(a.mode);
    let results = json!({
        "kind": "select",
        "n": n,
        "p": p,
        "k_eff": sub.k_eff(),
        "provenance": sub.provenance(),
        "covariates": ds.covariate_names,
        "response": ds.response_name,
        "files": ["indices.txt", "subdata.csv"],
    });
    let report = Report::new(argv.to_vec(), config, None, results, started);
    out.write("report.json", report.to_json()).map_err(runtime)?;
    out.commit().map_err(runtime)
}

fn resolve_method(a: &FitArgs) -> Result<Method> {
    let mut m = a.method;
    if let Some(alpha) = a.alpha {
        if !matches!(m, Method::Slev(_)) {
            return Err(CliError::Usage("--alpha applies only to --method slev".into()));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(CliError::Usage(format!("--alpha {alpha} must lie in [0, 1]")));
        }
        m = Method::Slev(alpha);
    }
    if let Some(blocks) = a.blocks {
        if !matches!(m, Method::Dc(_)) {
            return Err(CliError::Usage("--blocks applies only to --method dc".into()));
        }
        if blocks == 0 {
            return Err(CliError::Usage("--blocks must be positive".into()));
        }
        m = Method::Dc(Some(blocks));
    }
    Ok(m)
}

fn method_error(e: MethodError) -> CliError {
    match e {
        MethodError::Selection(SelectionError::InvalidSize { .. })
        | MethodError::Baseline(BaselineError::InvalidSampleSize { .. })
        | MethodError::Baseline(BaselineError::InvalidBlockCount { .. })
        | MethodError::Baseline(BaselineError::InvalidAlpha(_)) => CliError::Usage(e.to_string()),
        e => runtime(e),
    }
}

fn fit(a: &FitArgs, argv: &[String], started: Instant) -> Result<Option<String>> {
    let method = resolve_method(a)?;
    if method.is_random() && a.seed.is_none() {
        return Err(CliError::Usage(format!("--seed is required for method {method}")));
    }
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(CliError::Usage(format!("--level {} must lie strictly between 0 and 1", a.level)));
    }
    let k = match (method.uses_k(), a.k) {
        (true, None) => return Err(CliError::Usage(format!("--k is required for method {method}"))),
        (true, Some(k)) => k,
        (false, _) => 0,
    };
    let out = a.out.as_deref().map(OutputSet::create).transpose().map_err(runtime)?;

    let ds = a.data.load()?;
    let (n, p) = (ds.data.n(), ds.data.p());
    if method.uses_k() {
        let lower = if method == Method::Dopt { (2 * p).max(p + 2) } else { p + 2 };
        check_k(k, lower, n)?;
    }
    let opts = MethodOptions {
        mode: a.mode,
        with_replacement: !a.without_replacement,
        adjusted_intercept: true,
        keep_subdata: true,
    };
    let mut rng = StreamKey::new(a.seed.unwrap_or(0)).child(label::METHOD).rng();
    let outcome = estimate(method, &ds.data, k, &opts, &mut rng).map_err(method_error)?;
    let fit = &outcome.fit;

    let names: Vec<String> = std::iter::once("intercept".to_string())
        .chain(ds.covariate_names.iter().cloned())
        .collect();
    let mut coefficients = Vec::with_capacity(p + 1);
    for (j, (name, est)) in names.iter().zip(fit.coefficients()).enumerate() {
        let ci = confidence_interval(est, fit.se[j], a.level).map_err(runtime)?;
        coefficients.push(json!({"name": name, "estimate": est, "se": fit.se[j], "ci": ci}));
    }

    let mut results = json!({
        "kind": "fit",
        "n": n,
        "p": p,
        "method": method,
        "k": method.uses_k().then_some(k),
        "rows_used": outcome.rows_used,
        "singular_draws": outcome.singular_draws,
        "fit": fit,
        "coefficients": coefficients,
    });
    if let Some(sub) = &outcome.subdata {
        let adjusted = outcome.adjusted_beta0.expect("dopt computes the adjusted intercept");
        let (bounds, notes) = dopt_bounds(&ds, sub, fit.sigma2_hat);
        results["adjusted_intercept"] = json!({"estimate": adjusted});
        results["provenance"] = json!(sub.provenance());
        results["bounds"] = json!(bounds);
        results["bound_notes"] = json!(notes);
    }

    let mut config = a.data.echo();
    config["method"] = json!(method);
    config["k"] = json!(a.k);
    config["level"] = json!(a.level);
    config["mode"] = json!(a.mode);
    config["with_replacement"] = json!(!a.without_replacement);
    let report = Report::new(argv.to_vec(), config, a.seed, results, started);
    match out {
        Some(mut out) => {
            out.write("report.json", report.to_json()).map_err(runtime)?;
            out.commit().map_err(runtime)?;
            Ok(None)
        }
        None => Ok(Some(report.to_json())),
    }
}

/// Checks the selected design against its theoretical bounds. The
/// determinant bound is compared with `σ² = 1`; the variance bounds use
/// `σ̂²`, or 1 for a perfect fit.
fn dopt_bounds(ds: &Dataset, sub: &iboss_core::Subdata, sigma2_hat: f64) -> (Vec<BoundReport>, Vec<String>) {
    let mut bounds = Vec::new();
    let mut notes = Vec::new();
    let full = full_column_ranges(&ds.data);
    let k = sub.k_eff();
    bounds.push(BoundReport::log_scalar(
        "log_det_upper",
        log_d_upper_bound(&full, k, 1.0),
        log_det_xtx(sub),
    ));
    let r = k / (2 * sub.p());
    let sigma2 = if sigma2_hat > 0.0 { sigma2_hat } else { 1.0 };
    match order_statistic_ranges(&ds.data, r) {
        Ok(quant) => {
            match attainment_ratio(sub, &full, &quant, r) {
                Ok(b) => bounds.push(b),
                Err(e) => notes.push(format!("attainment_ratio_log: {e}")),
            }
            match variance_bounds(sub, sigma2, &full, &quant, r) {
                Ok(b) => bounds.extend(b),
                Err(e) => notes.push(format!("variance bounds: {e}")),
            }
        }
        Err(e) => notes.push(format!("order statistics: {e}")),
    }
    (bounds, notes)
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::Config(c) => CliError::Usage(format!("invalid config at {c}")),
        SimError::Method(m) => method_error(m),
        e => runtime(e),
    }
}

fn write_metrics(
    dir: &Path,
    argv: &[String],
    cfg: &ExperimentConfig,
    table: &iboss_core::MetricTable,
    started: Instant,
) -> Result<()> {
    let mut out = OutputSet::create(dir).map_err(runtime)?;
    out.write("metrics.csv", table.to_csv_string()).map_err(runtime)?;
    let mut metrics_json = serde_json::to_string_pretty(table).map_err(runtime)?;
    metrics_json.push('\n');
    out.write("metrics.json", metrics_json).map_err(runtime)?;
    let results = json!({
        "kind": "metrics",
        "runner": cfg.runner,
        "metrics": table,
    });
    let config = serde_json::to_value(cfg).map_err(runtime)?;
    let report = Report::new(argv.to_vec(), config, Some(cfg.seed), results, started);
    out.write("report.json", report.to_json()).map_err(runtime)?;
    out.commit().map_err(runtime)
}

fn experiment(a: &ExperimentArgs, argv: &[String], started: Instant) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| runtime(format!("{}: {e}", a.config.display())))?;
    let cfg = ExperimentConfig::from_json_str(&text).map_err(|e| CliError::Usage(format!("invalid config at {e}")))?;
    let dataset = match (&cfg.runner, &cfg.dataset) {
        (RunnerKind::Bootstrap, Some(spec)) => {
            let base = a.config.parent().unwrap_or(Path::new("."));
            let path = base.join(&spec.path);
            let opts = LoadOptions {
                format: spec.format,
                response: Some(spec.response.clone()),
                transform: spec.transform.clone(),
                drop: spec.drop.clone(),
            };
            let ds = load_dataset(&path, &opts).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            Some(ds.data)
        }
        (_, Some(_)) => return Err(CliError::Usage("invalid config at /dataset: only the bootstrap runner reads a dataset".into())),
        _ => None,
    };
    let table = iboss_core::simgen::run_experiment(&cfg, dataset.as_ref()).map_err(sim_error)?;
    write_metrics(&a.out, argv, &cfg, &table, started)
}

fn bench(a: &BenchArgs, argv: &[String], started: Instant) -> Result<()> {
    let p = a.p_grid.iter().copied().max().unwrap_or(1);
    let cfg = ExperimentConfig {
        runner: RunnerKind::Timing,
        case: CovariateCase::new(a.case, p),
        beta: None,
        sigma2: 9.0,
        error_model: Default::default(),
        n_grid: a.n_grid.clone(),
        k_grid: vec![a.k],
        replications: 1,
        methods: a.methods.clone(),
        seed: a.seed,
        mode: a.mode,
        with_replacement: true,
        target_coef: 1,
        level: 0.95,
        n_new: 1,
        p_grid: Some(a.p_grid.clone()),
        timing_repeats: a.repeats,
        dataset: None,
    };
    cfg.validate().map_err(|e| CliError::Usage(format!("invalid benchmark settings at {e}")))?;
    let table = iboss_core::simgen::run_experiment(&cfg, None).map_err(sim_error)?;
    write_metrics(&a.out, argv, &cfg, &table, started)
}
