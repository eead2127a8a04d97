use std::f64::consts::PI;
use std::fs;

use cpdmd::theory::{complexity_bench, complexity_csv, noisy_sine, records_csv, spearman, verify_bound};
use cpdmd::Series;

use crate::args::TheoryArgs;
use crate::error::{CliError, CliResult};
use crate::io;

/// `(p, w, d)` configurations timed by the sweep.
const SWEEP: [(usize, usize, usize); 8] =
    [(1, 40, 10), (1, 60, 15), (1, 80, 20), (1, 100, 40), (2, 60, 15), (2, 80, 20), (3, 80, 20), (4, 100, 25)];

pub fn run(args: &TheoryArgs) -> CliResult<()> {
    let stream = match &args.input {
        Some(path) => Series::from_univariate(io::read_series(path)?.component(0)),
        None => noisy_sine(args.length, 6.0 * PI / 75.0, 0.1, args.seed),
    };
    let (w, d) = (args.window, args.order);
    if d == 0 || d >= w {
        return Err(CliError::usage(format!("order {d} must lie in 1..{w}")));
    }
    if args.windows == 0 {
        return Err(CliError::usage("--windows must be at least 1"));
    }
    let last = w + args.windows - 1;
    if last + 1 > stream.len() {
        return Err(CliError::data(format!("{} windows of width {w} need {} observations, got {}", args.windows, last + 1, stream.len())));
    }
    let summary = verify_bound(&stream, w..=last, w, d)?;
    if let Some(dir) = &args.output {
        fs::create_dir_all(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
        io::emit(Some(&dir.join("bounds.csv")), &records_csv(&summary.records))?;
    }
    println!(
        "bound: windows={} checked={} skipped={} violations={} max_e_disagreement={:.3e}",
        args.windows,
        summary.records.len(),
        summary.skipped.len(),
        summary.violations,
        summary.max_disagreement
    );

    if !args.no_sweep {
        let rows = complexity_bench(&SWEEP, 30, 5, args.seed)?;
        let cost: Vec<f64> = rows.iter().map(|r| r.theoretical_cost).collect();
        let secs: Vec<f64> = rows.iter().map(|r| r.seconds_per_step).collect();
        if let Some(dir) = &args.output {
            io::emit(Some(&dir.join("complexity.csv")), &complexity_csv(&rows))?;
        }
        println!("complexity: configs={} spearman={:.3}", rows.len(), spearman(&cost, &secs));
    }

    if summary.violations > 0 {
        return Err(CliError::numerical(format!("{} bound violation(s)", summary.violations)));
    }
    Ok(())
}
