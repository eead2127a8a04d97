mod args;
mod commands;
mod error;
mod io;

use std::process::ExitCode;

use clap::Parser;
use cpdmd::Execution;

use args::{Cli, Command};
use error::{CliError, CliResult};

fn execution(jobs: Option<usize>) -> CliResult<Execution> {
    match jobs {
        Some(0) => Err(CliError::usage("--jobs must be at least 1")),
        Some(1) => Ok(Execution::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::usage(format!("--jobs {n}: {e}")))?;
            Ok(Execution::Parallel)
        }
        #[cfg(not(feature = "parallel"))]
        Some(_) => Err(CliError::usage("built without parallel support; use --jobs 1")),
        None => Ok(Execution::default()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let exec = execution(cli.jobs)?;
    match &cli.command {
        Command::Detect(a) => commands::detect::run(a, exec),
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Evaluate(a) => commands::evaluate::run(a),
        Command::Benchmark(a) => commands::benchmark::run(a, exec),
        Command::TheoryCheck(a) => commands::theory::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind.exit_code())
        }
    }
}
