//! The `sra` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod config;
mod bounds_cmd;
mod eval;
mod io;
mod run;
mod simulate;
mod tune;

use config::{AlgorithmName, AlgorithmSpec, InitName, InitSpec, ScheduleName};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        use crate::Error as E;
        match e {
            e if e.is_numeric() => CliError::Numeric(e.to_string()),
            e @ (E::InvalidConfig(_) | E::InvalidParams(_)) => CliError::Usage(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "sra", version, about = "Robust and adaptive streaming estimation")]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a contaminated stream as CSV.
    Simulate(SimulateArgs),
    /// Run a learner over a stream and emit per-step JSONL.
    Run(RunArgs),
    /// Grid-search hyperparameters.
    Tune(TuneArgs),
    /// Compute MSE, alarm AUC and ROC AUC from a run.
    Eval(EvalArgs),
    /// Tabulate convergence bounds.
    Bounds(BoundsArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct StreamArgs {
    /// Use the two-component benchmark stream (T = 20000, change at 10001).
    #[arg(long)]
    pub paper_synthetic: bool,
    /// Inlier probability.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Half-width of the uniform noise box.
    #[arg(long = "U", alias = "u")]
    pub u: Option<f64>,
    /// Random seed (default from SRA_SEED, else 0).
    #[arg(long, env = "SRA_SEED")]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub stream: StreamArgs,
    /// Stream length (overrides the config or benchmark length).
    #[arg(long)]
    pub t_len: Option<usize>,
    /// Output CSV; stdout if omitted. A `.config.json` sidecar is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct AlgorithmArgs {
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmName>,
    /// Truncation threshold; `inf` disables truncation.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "M", alias = "m")]
    pub m: Option<f64>,
    /// Constant step size (overrides the rule from β and M).
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleName>,
    #[arg(long)]
    pub c: Option<f64>,
    /// sEM step size or SDEM forgetting factor.
    #[arg(long)]
    pub r: Option<f64>,
}

impl AlgorithmArgs {
    fn spec(&self) -> AlgorithmSpec {
        AlgorithmSpec {
            name: self.algorithm,
            gamma: self.gamma,
            beta: self.beta,
            m: self.m,
            rho: self.rho,
            schedule: self.schedule,
            c: self.c,
            r: self.r,
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct InputArgs {
    /// Input file: a stream CSV (`y1..yd` columns), a labeled CSV (see
    /// --label-column) or a one-value-per-line series.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Treat the input as a labeled CSV with this label column.
    #[arg(long)]
    pub label_column: Option<String>,
    /// Real-data protocol (well-log, smtp, thyroid): sets the tuning range,
    /// the training prefix and uniform initialization.
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct InitArgs {
    #[arg(long, value_enum)]
    pub init: Option<InitName>,
    /// Initialization window as `start,end` (1-based, inclusive).
    #[arg(long, value_parser = parse_range)]
    pub init_range: Option<(usize, usize)>,
    /// Number of uniform initialization draws.
    #[arg(long)]
    pub init_points: Option<usize>,
    #[arg(long)]
    pub init_seed: Option<u64>,
    /// Number of mixture components.
    #[arg(long)]
    pub k: Option<usize>,
}

impl InitArgs {
    fn spec(&self) -> InitSpec {
        InitSpec { mode: self.init, range: self.init_range, points: self.init_points, seed: self.init_seed }
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub stream: StreamArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub algorithm: AlgorithmArgs,
    #[command(flatten)]
    pub init: InitArgs,
    /// Output JSONL; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TuneArgs {
    #[command(flatten)]
    pub stream: StreamArgs,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub init: InitArgs,
    #[command(flatten)]
    pub detect: DetectArgs,
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmName>,
    /// Comma-separated grids.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub beta: Option<Vec<f64>>,
    #[arg(long = "M", alias = "m", value_delimiter = ',')]
    pub m: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<f64>>,
    #[arg(long = "k-grid", value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    /// s-eval (synthetic benchmark), alarm-auc or roc-auc.
    #[arg(long)]
    pub objective: Option<String>,
    /// Repetitions per grid cell (streams or initialization seeds).
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct DetectArgs {
    /// Maximum tolerated detection delay.
    #[arg(long)]
    pub tau: Option<usize>,
    /// Scored range `start,end` (1-based, inclusive).
    #[arg(long, value_parser = parse_range)]
    pub range: Option<(usize, usize)>,
    #[arg(long, value_delimiter = ',')]
    pub change_points: Option<Vec<usize>>,
    /// Built-in Well-log annotation set (1 to 5).
    #[arg(long)]
    pub annotation: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// JSONL written by `run`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Ground truth: a stream CSV, or a labeled CSV with --label-column.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[command(flatten)]
    pub detect: DetectArgs,
    /// Transient period for the MSE windows.
    #[arg(long)]
    pub mse_tau: Option<usize>,
    #[arg(long)]
    pub t_star: Option<usize>,
    #[arg(long, value_parser = parse_range)]
    pub eval_window: Option<(usize, usize)>,
    /// JSON report path; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV of the alarm curve.
    #[arg(long)]
    pub curve_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub d0: Option<f64>,
    #[arg(long)]
    pub d1: Option<f64>,
    #[arg(long)]
    pub sigma0_sq: Option<f64>,
    #[arg(long)]
    pub sigma1_sq: Option<f64>,
    #[arg(long = "L", alias = "l")]
    pub l: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "U", alias = "u")]
    pub u: Option<f64>,
    #[arg(long)]
    pub d: Option<u32>,
    #[arg(long)]
    pub v0n: Option<f64>,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long = "M", alias = "m")]
    pub m: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub rho: Option<Vec<f64>>,
    /// Also minimize the constant-step bound over ρ and cross-check the
    /// step-size rule.
    #[arg(long)]
    pub minimize: bool,
    /// Set V₀,ₙ so the ρ-stationary point sits at the step-size rule.
    #[arg(long)]
    pub stationary: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected start,end")?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad start {a:?}"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad end {b:?}"))?;
    if a == 0 || a > b {
        return Err("need 1 <= start <= end".into());
    }
    Ok((a, b))
}

/// Parse `args` and run; returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "sra: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let file = config::load(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate(a) => simulate::cmd_simulate(&file, &a),
        Command::Run(a) => run::cmd_run(&file, &a),
        Command::Tune(a) => tune::cmd_tune(&file, &a),
        Command::Eval(a) => eval::cmd_eval(&file, &a),
        Command::Bounds(a) => bounds_cmd::cmd_bounds(&file, &a),
    }
}
