//! Multiple-changepoint driver: select hyperparameters on a burn-in, run the
//! single-changepoint detector, and restart from each detection.

use serde::{Deserialize, Serialize};

use crate::detector::{single_cp, validate_chart, HyperParams, TraceRow};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::selection::{select_hyperparams, GridSpec};
use crate::series::Series;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub burn_in: usize,
    pub lambda: f64,
    pub limit: f64,
    pub grid: GridSpec,
    #[serde(skip)]
    pub execution: Execution,
    /// Keep the per-step diagnostics of every segment in the report.
    #[serde(skip)]
    pub keep_traces: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            burn_in: 100,
            lambda: 0.05,
            limit: 4.5,
            grid: GridSpec::default(),
            execution: Execution::default(),
            keep_traces: false,
        }
    }
}

/// One detector run: observations `start..=end` (1-based, absolute) with the
/// selected embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub w: usize,
    pub d: usize,
    pub r: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ChangepointReport {
    pub changepoints: Vec<usize>,
    pub segments: Vec<Segment>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
    /// Per-segment traces with absolute times; only kept on request.
    #[serde(skip)]
    pub traces: Option<Vec<Vec<TraceRow>>>,
}

impl ChangepointReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serialises")
    }
}

impl PipelineConfig {
    fn validate(&self) -> Result<()> {
        if self.burn_in < 10 {
            return Err(Error::InvalidParameter(format!("burn-in {} shorter than 10", self.burn_in)));
        }
        validate_chart(self.lambda, self.limit)
    }

    /// Runs the restart driver over the whole stream.
    pub fn detect_all(&self, stream: &Series) -> Result<ChangepointReport> {
        self.run(stream, usize::MAX)
    }

    /// Stops after the first detection.
    pub fn detect_first(&self, stream: &Series) -> Result<ChangepointReport> {
        self.run(stream, 1)
    }

    fn run(&self, stream: &Series, max_changes: usize) -> Result<ChangepointReport> {
        self.validate()?;
        let total = stream.len();
        let mut report = ChangepointReport::default();
        let mut traces = Vec::new();
        let mut s = 1;
        while report.changepoints.len() < max_changes && total + 1 >= s + self.burn_in {
            let burn = stream.segment(s, s + self.burn_in - 1);
            let selection = match select_hyperparams(&burn, &self.grid, self.execution) {
                Ok(sel) => sel,
                Err(Error::AllCandidatesFailed) => {
                    report.warnings.push(format!("segment starting at {s}: every candidate failed on the burn-in; stopping"));
                    break;
                }
                Err(e) => return Err(e),
            };
            let cand = selection.best;
            let params = HyperParams::new(self.burn_in, cand, self.lambda, self.limit);
            let outcome = single_cp(&stream.segment(s, total), &params)?;
            if self.keep_traces {
                traces.push(outcome.trace.into_iter().map(|r| TraceRow { t: r.t + s - 1, ..r }).collect());
            }
            let end = outcome.detection.map_or(total, |t| s + t - 1);
            report.segments.push(Segment { start: s, end, w: cand.window, d: cand.order, r: cand.rank });
            match outcome.detection {
                Some(_) => {
                    report.changepoints.push(end);
                    s = end;
                }
                None => break,
            }
        }
        if self.keep_traces {
            report.traces = Some(traces);
        }
        Ok(report)
    }
}
