use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cpdmd::metrics::MarginSpec;
use cpdmd::selection::GridSpec;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "cpdmd", version, about = "Online changepoint detection with DMD on Hankel-embedded sliding windows")]
pub struct Cli {
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect changepoints in a CSV stream.
    Detect(DetectArgs),
    /// Write seeded synthetic streams and a truth manifest.
    Simulate(SimulateArgs),
    /// Score detections against a truth manifest.
    Evaluate(EvaluateArgs),
    /// Run the synthetic benchmark and print the summary table.
    Benchmark(BenchmarkArgs),
    /// Check the eigenvalue perturbation bound and time the per-step cost.
    TheoryCheck(TheoryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// CSV with a header row naming the p columns.
    #[arg(long)]
    pub input: PathBuf,
    /// Report destination (stdout if omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Per-step diagnostics CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lambda: f64,
    #[arg(long, default_value_t = 4.5)]
    pub limit: f64,
    /// Grid override, e.g. `windows=0.4,0.6;orders=0.1;multiplier=2;levels=1`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Stop after the first changepoint.
    #[arg(long)]
    pub first: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Catalog name such as `mean/3` or `periodicity/5pi/75`.
    #[arg(long)]
    pub scenario: String,
    /// Number of seeded streams.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long)]
    pub length: Option<usize>,
    /// Generate the change-free version of the scenario's type.
    #[arg(long)]
    pub null: bool,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, env = "CPDMD_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Truth manifest (as written by `simulate`).
    #[arg(long)]
    pub truth: PathBuf,
    /// Detections: a single report, or an object mapping sequence ids to
    /// reports or changepoint lists.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Left and right margins, `left,right`.
    #[arg(long, default_value = "0,30")]
    pub margins: String,
    /// Burn-in subtracted from false-alarm run lengths.
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Scenarios to run (repeatable); the whole catalog by default.
    #[arg(long)]
    pub scenario: Vec<String>,
    #[arg(long, default_value_t = 100)]
    pub seeds: u64,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    /// Restrict the CPDMD chart grid to one smoothing constant.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Restrict the CPDMD chart grid to one control limit.
    #[arg(long)]
    pub limit: Option<f64>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long, default_value = "0,30")]
    pub margins: String,
    /// Change-free runs per change type for the ARL0 columns.
    #[arg(long, default_value_t = 0)]
    pub null: u64,
    /// Length of the change-free runs.
    #[arg(long, default_value_t = 100_000)]
    pub length: usize,
    /// Wall-clock budget in seconds; remaining scenarios are skipped.
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, env = "CPDMD_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TheoryArgs {
    /// Stream to check (first column); a seeded noisy sine if omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory for `bounds.csv` and `complexity.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 300)]
    pub length: usize,
    #[arg(long, default_value_t = 40)]
    pub window: usize,
    #[arg(long, default_value_t = 10)]
    pub order: usize,
    /// Number of consecutive window pairs to check.
    #[arg(long, default_value_t = 100)]
    pub windows: usize,
    /// Skip the timing sweep.
    #[arg(long)]
    pub no_sweep: bool,
    #[arg(long, env = "CPDMD_SEED", default_value_t = 0)]
    pub seed: u64,
}

pub fn parse_margins(text: &str) -> CliResult<MarginSpec> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [l, r] => match (l.parse(), r.parse()) {
            (Ok(mu_l), Ok(mu_r)) => Ok(MarginSpec { mu_l, mu_r }),
            _ => Err(CliError::usage(format!("margins {text:?}: expected two non-negative integers"))),
        },
        _ => Err(CliError::usage(format!("margins {text:?}: expected `left,right`"))),
    }
}

/// Applies `key=v1,v2;...` overrides to the default grid.
pub fn parse_grid(text: Option<&str>) -> CliResult<GridSpec> {
    let mut spec = GridSpec::default();
    let Some(text) = text else { return Ok(spec) };
    for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = item.split_once('=').ok_or_else(|| CliError::usage(format!("grid entry {item:?}: expected key=value")))?;
        let bad = || CliError::usage(format!("grid entry {item:?}: bad value"));
        let floats = || value.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad());
        match key.trim() {
            "windows" => spec.window_fractions = floats()?,
            "orders" => spec.order_fractions = floats()?,
            "multiplier" => spec.rank_multiplier = value.trim().parse().map_err(|_| bad())?,
            "levels" => spec.rank_levels = value.trim().parse().map_err(|_| bad())?,
            other => {
                return Err(CliError::usage(format!(
                    "unknown grid key {other:?}; expected windows, orders, multiplier or levels"
                )))
            }
        }
    }
    Ok(spec)
}
