//! CSV ingestion and output sinks.

use std::fs;
use std::io::Write;
use std::path::Path;

use cpdmd::Series;

use crate::error::{CliError, CliResult};

/// Reads a headed CSV with one observation per row; the number of header
/// fields fixes the dimension.
pub fn read_series(path: &Path) -> CliResult<Series> {
    let file = fs::File::open(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    parse_series(file, &path.display().to_string())
}

pub fn parse_series(input: impl std::io::Read, label: &str) -> CliResult<Series> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers().map_err(|e| csv_error(label, e))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        return Err(CliError::data(format!("{label}: empty input, a header row is required")));
    }
    let p = headers.len();
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(label, e))?;
        let line = record.position().map_or(0, |pos| pos.line());
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| CliError::data(format!("{label}: line {line}, column {}: not a number: {cell:?}", j + 1)))?;
            data.push(v);
        }
    }
    if data.is_empty() {
        return Err(CliError::data(format!("{label}: no observations after the header")));
    }
    Series::new(p, data).map_err(|e| CliError::data(format!("{label}: {e}")))
}

fn csv_error(label: &str, e: csv::Error) -> CliError {
    match e.kind() {
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => CliError::data(format!(
            "{label}: line {}: expected {expected_len} fields, found {len}",
            pos.as_ref().map_or(0, |p| p.line())
        )),
        _ => {
            let line = e.position().map_or(0, |p| p.line());
            CliError::data(format!("{label}: line {line}: {e}"))
        }
    }
}

/// Writes a series with the given column names.
pub fn write_series(path: &Path, columns: &[String], series: &Series) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(io_error(path))?;
    w.write_record(columns).map_err(io_error(path))?;
    for t in 1..=series.len() {
        w.write_record(series.observation(t).iter().map(|v| v.to_string())).map_err(io_error(path))?;
    }
    w.flush().map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn io_error(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::data(format!("{}: {e}", path.display()))
}

/// Writes `text` to `path`, or stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::data(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::data(format!("stdout: {e}")))
        }
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}
