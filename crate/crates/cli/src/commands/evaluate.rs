use std::collections::{BTreeMap, BTreeSet};

use cpdmd::metrics::{arl0, arl1, covering, prf1, EvalResult};
use cpdmd::pipeline::ChangepointReport;
use serde::{Deserialize, Serialize};

use super::simulate::Manifest;
use crate::args::{parse_margins, EvaluateArgs, Format};
use crate::error::{CliError, CliResult};
use crate::io;

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Detections {
    Report(ChangepointReport),
    Batch(BTreeMap<String, Entry>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Entry {
    Report(ChangepointReport),
    List(Vec<usize>),
}

impl Entry {
    fn changepoints(self) -> Vec<usize> {
        match self {
            Entry::Report(r) => r.changepoints,
            Entry::List(v) => v,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub sequences: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub covering: f64,
    pub arl1: Option<(f64, f64)>,
    pub arl0: Option<(f64, f64)>,
}

pub const SUMMARY_HEADER: &str = "sequences,precision,recall,f1,covering,arl1,sdrl1,arl0,sdrl0";

impl Summary {
    pub fn csv(&self) -> String {
        let pair = |v: Option<(f64, f64)>| v.map_or("NA,NA".to_string(), |(m, s)| format!("{m:.2},{s:.2}"));
        format!(
            "{SUMMARY_HEADER}\n{},{:.3},{:.3},{:.3},{:.3},{},{}\n",
            self.sequences,
            self.precision,
            self.recall,
            self.f1,
            self.covering,
            pair(self.arl1),
            pair(self.arl0)
        )
    }
}

/// Pairs each truth sequence with its detections; ids must match exactly.
fn pair_up(manifest: &Manifest, detections: Detections) -> CliResult<Vec<Vec<usize>>> {
    match detections {
        Detections::Report(r) => {
            if manifest.sequences.len() != 1 {
                return Err(CliError::data(format!(
                    "a single report was given but the manifest lists {} sequences",
                    manifest.sequences.len()
                )));
            }
            Ok(vec![r.changepoints])
        }
        Detections::Batch(mut map) => {
            let truth_ids: BTreeSet<&str> = manifest.sequences.iter().map(|s| s.id.as_str()).collect();
            let det_ids: BTreeSet<&str> = map.keys().map(String::as_str).collect();
            if truth_ids != det_ids {
                let missing: Vec<_> = truth_ids.difference(&det_ids).collect();
                let extra: Vec<_> = det_ids.difference(&truth_ids).collect();
                return Err(CliError::data(format!(
                    "sequence ids do not match: missing detections for {missing:?}, unknown ids {extra:?}"
                )));
            }
            Ok(manifest.sequences.iter().map(|s| map.remove(&s.id).expect("checked").changepoints()).collect())
        }
    }
}

pub fn summarize(manifest: &Manifest, detections: &[Vec<usize>], margins: cpdmd::metrics::MarginSpec, burn_in: usize) -> Summary {
    let mut evals = Vec::new();
    let mut cover = 0.0;
    let mut delays = Vec::new();
    let mut null_lengths = Vec::new();
    for (seq, det) in manifest.sequences.iter().zip(detections) {
        evals.push(prf1(&seq.changepoints, det, margins));
        cover += covering(&seq.changepoints, det, seq.length);
        match seq.changepoints.first() {
            Some(&tau) => delays.push((tau, det.first().copied())),
            None => null_lengths.push(det.first().map_or(seq.length, |&t| t).saturating_sub(burn_in)),
        }
    }
    let pooled = EvalResult::pooled(&evals);
    Summary {
        sequences: evals.len(),
        precision: pooled.precision,
        recall: pooled.recall,
        f1: pooled.f1,
        covering: if evals.is_empty() { 0.0 } else { cover / evals.len() as f64 },
        arl1: if delays.is_empty() { None } else { arl1(&delays).ok() },
        arl0: arl0(&null_lengths).ok(),
    }
}

pub fn run(args: &EvaluateArgs) -> CliResult<()> {
    let margins = parse_margins(&args.margins)?;
    let manifest: Manifest = io::read_json(&args.truth)?;
    if manifest.sequences.is_empty() {
        return Err(CliError::data(format!("{}: no sequences", args.truth.display())));
    }
    let detections: Detections = io::read_json(&args.input)?;
    let paired = pair_up(&manifest, detections)?;
    let summary = summarize(&manifest, &paired, margins, args.burn_in);
    let text = match args.format {
        Format::Csv => summary.csv(),
        Format::Json => serde_json::to_string(&summary).expect("summary serialises") + "\n",
    };
    io::emit(args.output.as_deref(), &text)
}
