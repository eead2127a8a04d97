use std::time::Duration;

use cpdmd::experiment::{run_benchmark, table_csv, BenchmarkSpec, ChartConfig};
use cpdmd::synth;
use cpdmd::Execution;

use crate::args::{parse_grid, parse_margins, BenchmarkArgs, Format};
use crate::error::{CliError, CliResult};
use crate::io;

pub fn spec_from_args(args: &BenchmarkArgs, execution: Execution) -> CliResult<BenchmarkSpec> {
    if args.seeds == 0 {
        return Err(CliError::usage("--seeds must be at least 1"));
    }
    let mut spec = BenchmarkSpec {
        burn_in: args.burn_in,
        grid: parse_grid(args.grid.as_deref())?,
        margins: parse_margins(&args.margins)?,
        seeds: args.seeds,
        base_seed: args.seed,
        null_runs: args.null,
        null_length: args.length,
        execution,
        budget: args.budget.map(Duration::from_secs),
        ..BenchmarkSpec::default()
    };
    if args.lambda.is_some() || args.limit.is_some() {
        let only = ChartConfig::new(
            args.lambda.unwrap_or(spec.cpdmd_default.lambda),
            args.limit.unwrap_or(spec.cpdmd_default.limit),
        );
        spec.cpdmd = vec![only];
        spec.cpdmd_default = only;
    }
    Ok(spec)
}

pub fn run(args: &BenchmarkArgs, execution: Execution) -> CliResult<()> {
    let spec = spec_from_args(args, execution)?;
    let scenarios = if args.scenario.is_empty() {
        synth::scenario_catalog()
    } else {
        args.scenario.iter().map(|n| synth::lookup(n)).collect::<Result<Vec<_>, _>>()?
    };
    let result = run_benchmark(&scenarios, &spec)?;
    if result.overrun {
        eprintln!("warning: time budget exhausted; the table covers only the scenarios that finished");
    }
    if result.failures > 0 {
        eprintln!("warning: {} sequence(s) failed numerically and count as missed", result.failures);
    }
    let text = match args.format {
        Format::Csv => table_csv(&result.rows),
        Format::Json => {
            serde_json::json!({ "rows": result.rows, "overrun": result.overrun, "failures": result.failures }).to_string() + "\n"
        }
    };
    io::emit(args.output.as_deref(), &text)
}
