//! The `iboss` command line: subdata selection, model fits, simulation
//! experiments and timing benchmarks, each leaving a JSON report.
//!
//! Exit codes: 0 when every output was written, 2 for usage and
//! configuration errors, 1 for failures while running. Outputs of a failed
//! command are removed.

mod commands;
pub mod io;
pub mod output;
pub mod report;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use iboss_core::simgen::{CaseTag, DataFormat};
use iboss_core::{Method, SelectionMode};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "iboss", version, about = "Information-based optimal subdata selection for linear regression")]
pub struct Cli {
    /// Worker threads for parallel sections (selection in parallel-merge
    /// mode, experiment replications).
    #[arg(long, global = true, env = "IBOSS_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select D-optimality-motivated subdata and write its row indices.
    Select(SelectArgs),
    /// Fit the linear model with one estimator.
    Fit(FitArgs),
    /// Run a simulation experiment described by a JSON config.
    Experiment(ExperimentArgs),
    /// Time estimators on generated data.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// csv or f64le-columnar
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    pub format: DataFormat,
    /// Response column: a header name for CSV (default `y`), a column index
    /// for columnar files (default taken from the file header).
    #[arg(long)]
    pub response: Option<String>,
    /// Take natural logs of every covariate.
    #[arg(long)]
    pub log: bool,
    /// Take logs of every covariate except these (implies --log).
    #[arg(long = "log-exclude", value_delimiter = ',')]
    pub log_exclude: Vec<String>,
    /// Covariate columns to ignore.
    #[arg(long, value_delimiter = ',')]
    pub drop: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub k: usize,
    /// sequential or parallel-merge
    #[arg(long, default_value = "sequential")]
    pub mode: SelectionMode,
    /// Directory for indices.txt, subdata.csv and report.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// dopt, uni, lev, slev, levunw, dc or full
    #[arg(long)]
    pub method: Method,
    /// Shrinkage weight for slev.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Block count for dc.
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Subdata size; required by every method except dc and full.
    #[arg(long)]
    pub k: Option<usize>,
    /// Required by the random subsampling methods.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value = "sequential")]
    pub mode: SelectionMode,
    /// Subsample without replacement (systematic sampling).
    #[arg(long)]
    pub without_replacement: bool,
    /// Directory for report.json; the report goes to stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for metrics.csv, metrics.json and report.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "normal")]
    pub case: CaseTag,
    /// Full-data sizes.
    #[arg(long = "n", value_delimiter = ',', required = true)]
    pub n_grid: Vec<usize>,
    /// Covariate counts.
    #[arg(long = "p", value_delimiter = ',', default_value = "10")]
    pub p_grid: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub k: usize,
    #[arg(long, value_delimiter = ',', default_value = "dopt,full")]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "sequential")]
    pub mode: SelectionMode,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_format(s: &str) -> Result<DataFormat, String> {
    match s {
        "csv" => Ok(DataFormat::Csv),
        "f64le-columnar" | "columnar" => Ok(DataFormat::F64leColumnar),
        other => Err(format!("unknown format `{other}` (expected csv or f64le-columnar)")),
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Reports that are not written to a file go to `stdout`.
pub fn run(argv: Vec<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render().ansi());
            return e.exit_code();
        }
    };
    let result = match cli.threads {
        Some(0) => Err(CliError::Usage("IBOSS_THREADS must be at least 1".into())),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Runtime(format!("cannot start thread pool: {e}")))
            .and_then(|pool| pool.install(|| commands::dispatch(&cli.command, &argv))),
        None => commands::dispatch(&cli.command, &argv),
    };
    match result {
        Ok(None) => 0,
        Ok(Some(text)) => match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(stderr, "error: cannot write report: {e}");
                1
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
