use cpdmd::detector::trace_csv;
use cpdmd::pipeline::PipelineConfig;
use cpdmd::Execution;

use crate::args::{parse_grid, DetectArgs, Format};
use crate::error::CliResult;
use crate::io;

pub fn run(args: &DetectArgs, execution: Execution) -> CliResult<()> {
    let stream = io::read_series(&args.input)?;
    let config = PipelineConfig {
        burn_in: args.burn_in,
        lambda: args.lambda,
        limit: args.limit,
        grid: parse_grid(args.grid.as_deref())?,
        execution,
        keep_traces: args.trace.is_some(),
    };
    let report = if args.first { config.detect_first(&stream)? } else { config.detect_all(&stream)? };
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let (Some(path), Some(traces)) = (&args.trace, &report.traces) {
        let rows: Vec<_> = traces.iter().flatten().copied().collect();
        io::emit(Some(path), &trace_csv(&rows))?;
    }
    let text = match args.format {
        Format::Json => format!("{}\n", report.to_json()),
        Format::Csv => {
            let mut s = String::from("changepoint\n");
            for cp in &report.changepoints {
                s.push_str(&format!("{cp}\n"));
            }
            s
        }
    };
    io::emit(args.output.as_deref(), &text)
}
