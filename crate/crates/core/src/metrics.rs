//! Evaluation metrics: margin-based precision/recall/F1, run-length
//! statistics and the segment covering score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Acceptance window `-mu_l <= detection - truth <= mu_r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginSpec {
    pub mu_l: usize,
    pub mu_r: usize,
}

impl MarginSpec {
    pub const BENCHMARK: MarginSpec = MarginSpec { mu_l: 0, mu_r: 30 };

    pub fn accepts(&self, truth: usize, detection: usize) -> bool {
        let diff = detection as i64 - truth as i64;
        -(self.mu_l as i64) <= diff && diff <= self.mu_r as i64
    }
}

impl Default for MarginSpec {
    fn default() -> Self {
        Self::BENCHMARK
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Truths with at least one detection in their window.
    pub tp_count: usize,
    /// Detections lying in the window of at least one truth.
    pub matched_detections: usize,
    pub detection_count: usize,
    pub truth_count: usize,
}

fn f1_score(p: f64, r: f64) -> f64 {
    if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 }
}

impl EvalResult {
    fn from_counts(tp: usize, matched: usize, detections: usize, truths: usize) -> Self {
        let recall = if truths == 0 { 1.0 } else { tp as f64 / truths as f64 };
        let precision = match (detections, truths) {
            (0, 0) => 1.0,
            (0, _) => 0.0,
            _ => matched as f64 / detections as f64,
        };
        Self {
            precision,
            recall,
            f1: f1_score(precision, recall),
            tp_count: tp,
            matched_detections: matched,
            detection_count: detections,
            truth_count: truths,
        }
    }

    /// Pools counts over several sequences and recomputes P, R and F1.
    pub fn pooled<'a>(results: impl IntoIterator<Item = &'a EvalResult>) -> EvalResult {
        let (mut tp, mut matched, mut det, mut truth) = (0, 0, 0, 0);
        for r in results {
            tp += r.tp_count;
            matched += r.matched_detections;
            det += r.detection_count;
            truth += r.truth_count;
        }
        Self::from_counts(tp, matched, det, truth)
    }
}

/// A truth is found if some detection falls in its window. Matching is not
/// exclusive: one detection may find several truths.
pub fn prf1(truth: &[usize], detections: &[usize], margins: MarginSpec) -> EvalResult {
    let tp = truth.iter().filter(|&&t| detections.iter().any(|&d| margins.accepts(t, d))).count();
    let matched = detections.iter().filter(|&&d| truth.iter().any(|&t| margins.accepts(t, d))).count();
    EvalResult::from_counts(tp, matched, detections.len(), truth.len())
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Detection delay statistics over runs that detected at or after the change.
pub fn arl1(runs: &[(usize, Option<usize>)]) -> Result<(f64, f64)> {
    if runs.is_empty() {
        return Err(Error::Empty);
    }
    let delays: Vec<f64> = runs
        .iter()
        .filter_map(|&(tau, det)| det.filter(|&d| d >= tau).map(|d| (d - tau) as f64))
        .collect();
    if delays.is_empty() {
        return Err(Error::NoValidRuns);
    }
    Ok(mean_sd(&delays))
}

/// Run-length statistics on change-free streams. Censored runs enter at
/// their truncation length.
pub fn arl0(run_lengths: &[usize]) -> Result<(f64, f64)> {
    if run_lengths.is_empty() {
        return Err(Error::Empty);
    }
    let v: Vec<f64> = run_lengths.iter().map(|&x| x as f64).collect();
    Ok(mean_sd(&v))
}

/// Half-open segments `[start, end)` induced by change times within `1..=len`.
fn partition(changes: &[usize], len: usize) -> Vec<(usize, usize)> {
    let mut bounds = vec![1];
    let mut inner: Vec<usize> = changes.iter().copied().filter(|&c| c > 1 && c <= len).collect();
    inner.sort_unstable();
    inner.dedup();
    bounds.extend(inner);
    bounds.push(len + 1);
    bounds.windows(2).map(|b| (b[0], b[1])).collect()
}

/// Covering of the true partition by the predicted one.
pub fn covering(truth: &[usize], detections: &[usize], len: usize) -> f64 {
    if len == 0 {
        return 1.0;
    }
    let gt = partition(truth, len);
    let pred = partition(detections, len);
    let jaccard = |a: (usize, usize), b: (usize, usize)| {
        let inter = a.1.min(b.1).saturating_sub(a.0.max(b.0));
        let union = (a.1 - a.0) + (b.1 - b.0) - inter;
        inter as f64 / union as f64
    };
    let total: f64 = gt
        .iter()
        .map(|&a| (a.1 - a.0) as f64 * pred.iter().map(|&b| jaccard(a, b)).fold(0.0, f64::max))
        .sum();
    total / len as f64
}
