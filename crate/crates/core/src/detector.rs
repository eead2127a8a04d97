//! Reconstruction-error monitoring and single-changepoint detection.
//!
//! Each step embeds the current window, fits DMD at the configured rank and
//! measures how badly the low-rank reconstruction matches the window. The
//! increments of that error feed an EWMA chart whose mean and variance are
//! estimated online.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::dmd;
use crate::embedding::{hankelize, make_window, unroll, HankelBatch, WindowedBatch};
use crate::error::{shape, Error, Result};
use crate::linalg::RealMatrix;
use crate::par::Execution;
use crate::series::Series;

/// Embedding and model size: window `w`, delay order `d`, DMD rank `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub window: usize,
    pub order: usize,
    pub rank: usize,
}

impl Candidate {
    pub fn new(window: usize, order: usize, rank: usize) -> Self {
        Self { window, order, rank }
    }

    /// Checks `2 <= w`, `1 <= d <= w` and `1 <= r <= min(p*d, w-d+1)`.
    pub fn validate(&self, p: usize) -> Result<()> {
        let Candidate { window: w, order: d, rank: r } = *self;
        if w < 2 {
            return Err(Error::InvalidParameter(format!("window {w} must be at least 2")));
        }
        if d == 0 || d > w {
            return Err(Error::OrderOutOfRange { order: d, window: w });
        }
        let max = (p * d).min(w - d + 1);
        if r == 0 || r > max {
            return Err(Error::RankOutOfRange { requested: r, max });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub burn_in: usize,
    pub window: usize,
    pub order: usize,
    pub rank: usize,
    pub lambda: f64,
    pub limit: f64,
}

impl HyperParams {
    pub fn new(burn_in: usize, candidate: Candidate, lambda: f64, limit: f64) -> Self {
        Self {
            burn_in,
            window: candidate.window,
            order: candidate.order,
            rank: candidate.rank,
            lambda,
            limit,
        }
    }

    pub fn candidate(&self) -> Candidate {
        Candidate::new(self.window, self.order, self.rank)
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        self.candidate().validate(p)?;
        if self.window > self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "window {} exceeds burn-in {}",
                self.window, self.burn_in
            )));
        }
        validate_chart(self.lambda, self.limit)
    }
}

pub(crate) fn validate_chart(lambda: f64, limit: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("lambda {lambda} outside [0, 1]")));
    }
    if !(limit > 0.0 && limit.is_finite()) {
        return Err(Error::InvalidParameter(format!("control limit {limit} must be positive")));
    }
    Ok(())
}

/// Mean squared entry of `x - x_hat`.
pub fn reconstruction_error(x: &WindowedBatch, x_hat: &WindowedBatch) -> Result<f64> {
    if x.data.shape() != x_hat.data.shape() {
        return Err(Error::ShapeMismatch {
            expected: shape(x.p, x.w),
            actual: shape(x_hat.p, x_hat.w),
        });
    }
    let n = (x.p * x.w) as f64;
    Ok((&x.data - &x_hat.data).norm_squared() / n)
}

/// Window -> Hankel -> DMD -> unroll -> error, for one window.
pub fn window_error(x: &WindowedBatch, cand: Candidate) -> Result<f64> {
    let h = hankelize(x, cand.order)?;
    let fit = dmd::dmd(&h.data, cand.rank)?;
    let h_hat = HankelBatch::from_matrix(x.p, x.w, cand.order, fit.reconstruction)?;
    reconstruction_error(x, &unroll(&h_hat)?)
}

/// Errors `eps_t` for every `t` in `range` (1-based, each `t >= w`).
///
/// The range is split into contiguous chunks evaluated under `exec`.
pub fn reconstruction_errors(
    series: &Series,
    cand: Candidate,
    range: RangeInclusive<usize>,
    exec: Execution,
) -> Result<Vec<f64>> {
    cand.validate(series.dim())?;
    let (lo, hi) = (*range.start(), *range.end());
    if lo > hi {
        return Ok(Vec::new());
    }
    if lo < cand.window || hi > series.len() {
        return Err(Error::InsufficientHistory {
            needed: hi.max(cand.window),
            available: series.len().min(lo),
        });
    }
    let n = hi - lo + 1;
    let chunks = if exec.is_parallel() { n.div_ceil(32) } else { 1 };
    let bounds: Vec<(usize, usize)> = (0..chunks)
        .map(|c| (lo + c * n / chunks, lo + (c + 1) * n / chunks))
        .collect();
    let parts = exec.map(&bounds, |&(a, b)| {
        (a..b)
            .map(|t| window_error(&make_window(series, t, cand.window)?, cand))
            .collect::<Result<Vec<f64>>>()
    });
    let mut out = Vec::with_capacity(n);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Welford running mean and population variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    pub var: f64,
}

impl Welford {
    pub fn update(&mut self, y: f64) {
        self.count += 1;
        let t = self.count as f64;
        let prev = self.mean;
        // Same recursion as ((t-1)/t) mean + y/t, rearranged so a constant
        // stream keeps its mean exactly.
        self.mean = prev + (y - prev) / t;
        self.var = ((t - 1.0) / t * self.var + (y - self.mean) * (y - prev) / t).max(0.0);
    }

    pub fn std(&self) -> f64 {
        self.var.sqrt()
    }
}

/// Output of one chart update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartStep {
    pub z: f64,
    pub mu: f64,
    pub sigma_z: f64,
    pub alarm: bool,
}

/// EWMA chart on an increment stream with online mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveEwma {
    pub lambda: f64,
    pub limit: f64,
    pub z: Option<f64>,
    pub welford: Welford,
}

impl AdaptiveEwma {
    pub fn new(lambda: f64, limit: f64) -> Self {
        Self { lambda, limit, z: None, welford: Welford::default() }
    }

    /// Consumes one increment. The first increment initialises the statistic.
    pub fn step(&mut self, delta: f64) -> ChartStep {
        let lambda = self.lambda;
        let z = match self.z {
            None => delta,
            Some(_) if lambda == 1.0 => delta,
            // (1 - lambda) Z + lambda delta, exact on constant input.
            Some(prev) => prev + lambda * (delta - prev),
        };
        self.z = Some(z);
        self.welford.update(delta);
        let n = self.welford.count as f64;
        let shrink = lambda / (2.0 - lambda) * (1.0 - (1.0 - lambda).powf(2.0 * n));
        let sigma_z = self.welford.std() * shrink.max(0.0).sqrt();
        let mu = self.welford.mean;
        let alarm = z > mu + self.limit * sigma_z || z < mu - self.limit * sigma_z;
        ChartStep { z, mu, sigma_z, alarm }
    }
}

/// One detector step. Chart columns are empty at the first step, where no
/// increment exists yet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub epsilon: f64,
    pub delta: Option<f64>,
    pub z: Option<f64>,
    pub mu: Option<f64>,
    pub sigma_z: Option<f64>,
    pub alarm: bool,
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("t,epsilon,delta,z,mu,sigma_z,alarm\n");
    let cell = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{:e},{},{},{},{},{}",
            r.t,
            r.epsilon,
            cell(r.delta),
            cell(r.z),
            cell(r.mu),
            cell(r.sigma_z),
            u8::from(r.alarm)
        );
    }
    out
}

/// Mutable state of a running detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorState {
    pub t: usize,
    pub prev_error: Option<f64>,
    pub chart: AdaptiveEwma,
    pub detected: Option<usize>,
}

/// Streaming single-changepoint detector fed one observation at a time.
#[derive(Debug, Clone)]
pub struct Detector {
    params: HyperParams,
    p: usize,
    buffer: VecDeque<Vec<f64>>,
    state: DetectorState,
}

impl Detector {
    pub fn new(params: HyperParams, p: usize) -> Result<Self> {
        params.validate(p)?;
        Ok(Self {
            params,
            p,
            buffer: VecDeque::with_capacity(params.window),
            state: DetectorState {
                t: 0,
                prev_error: None,
                chart: AdaptiveEwma::new(params.lambda, params.limit),
                detected: None,
            },
        })
    }

    pub fn state(&self) -> &DetectorState {
        &self.state
    }

    /// Feeds `x_t`. Returns a trace row once a full window is available.
    /// Alarms at `t <= T0` are reported in the row but never latch a
    /// detection.
    pub fn push(&mut self, x: &[f64]) -> Result<Option<TraceRow>> {
        if x.len() != self.p {
            return Err(Error::ShapeMismatch { expected: format!("{} components", self.p), actual: format!("{}", x.len()) });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let w = self.params.window;
        if self.buffer.len() == w {
            self.buffer.pop_front();
        }
        self.buffer.push_back(x.to_vec());
        self.state.t += 1;
        if self.buffer.len() < w {
            return Ok(None);
        }
        let data = RealMatrix::from_fn(self.p, w, |i, k| self.buffer[k][i]);
        let window = WindowedBatch { p: self.p, w, data };
        let epsilon = window_error(&window, self.params.candidate())?;
        Ok(Some(self.consume(epsilon)))
    }

    fn consume(&mut self, epsilon: f64) -> TraceRow {
        let t = self.state.t;
        let prev = self.state.prev_error.replace(epsilon);
        let mut row = TraceRow { t, epsilon, delta: None, z: None, mu: None, sigma_z: None, alarm: false };
        if let Some(prev) = prev {
            let delta = epsilon - prev;
            let step = self.state.chart.step(delta);
            row.delta = Some(delta);
            row.z = Some(step.z);
            row.mu = Some(step.mu);
            row.sigma_z = Some(step.sigma_z);
            row.alarm = step.alarm;
            if step.alarm && t > self.params.burn_in && self.state.detected.is_none() {
                self.state.detected = Some(t);
            }
        }
        row
    }
}

#[derive(Debug, Clone)]
pub struct SingleCpOutcome {
    /// First alarm time after the burn-in (1-based, relative to the stream).
    pub detection: Option<usize>,
    pub trace: Vec<TraceRow>,
}

/// Runs the detector over `stream` and stops at the first alarm after the
/// burn-in.
pub fn single_cp(stream: &Series, params: &HyperParams) -> Result<SingleCpOutcome> {
    if stream.len() < params.window {
        return Err(Error::InsufficientHistory { needed: params.window, available: stream.len() });
    }
    let mut det = Detector::new(*params, stream.dim())?;
    let mut trace = Vec::with_capacity(stream.len() + 1 - params.window);
    for t in 1..=stream.len() {
        if let Some(row) = det.push(stream.observation(t))? {
            trace.push(row);
        }
        if det.state.detected.is_some() {
            break;
        }
    }
    Ok(SingleCpOutcome { detection: det.state.detected, trace })
}

/// Replays the chart over precomputed errors `eps_w, eps_{w+1}, ...` and
/// returns the first alarm time after `burn_in`.
pub fn scan_errors(errors: &[f64], window: usize, burn_in: usize, lambda: f64, limit: f64) -> Option<usize> {
    let mut chart = AdaptiveEwma::new(lambda, limit);
    for (i, pair) in errors.windows(2).enumerate() {
        let t = window + i + 1;
        let step = chart.step(pair[1] - pair[0]);
        if step.alarm && t > burn_in {
            return Some(t);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn batch(m: RealMatrix) -> WindowedBatch {
        WindowedBatch::from_matrix(m).unwrap()
    }

    #[test]
    fn error_examples() {
        let x = batch(dmatrix![1.0, 2.0]);
        assert_eq!(reconstruction_error(&x, &x).unwrap(), 0.0);
        assert_eq!(reconstruction_error(&x, &batch(dmatrix![1.0, 0.0])).unwrap(), 2.0);
        let a = batch(dmatrix![1.0, 2.0; 3.0, 4.0]);
        let b = batch(dmatrix![0.0, 1.0; 2.0, 3.0]);
        assert_eq!(reconstruction_error(&a, &b).unwrap(), 1.0);
        assert!(matches!(reconstruction_error(&x, &a), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn welford_examples() {
        let mut w = Welford::default();
        w.update(1.0);
        assert_eq!((w.mean, w.var), (1.0, 0.0));
        w.update(2.0);
        assert_eq!((w.mean, w.var), (1.5, 0.25));
        w.update(3.0);
        assert!((w.mean - 2.0).abs() < 1e-15 && (w.var - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ewma_examples() {
        let mut c = AdaptiveEwma::new(0.5, 3.0);
        assert_eq!(c.step(1.0).z, 1.0);
        assert_eq!(c.step(3.0).z, 2.0);

        let mut c = AdaptiveEwma::new(1.0, 3.0);
        for d in [0.3, -1.0, 2.5] {
            assert_eq!(c.step(d).z, d);
        }

        let mut c = AdaptiveEwma::new(0.2, 1.0);
        for _ in 0..50 {
            let s = c.step(0.7);
            assert_eq!((s.z, s.mu, s.sigma_z), (0.7, 0.7, 0.0));
            assert!(!s.alarm);
        }
    }

    #[test]
    fn zero_lambda_freezes_statistic() {
        let mut c = AdaptiveEwma::new(0.0, 2.0);
        let first = c.step(0.4).z;
        for d in [1.0, -3.0, 7.0, 0.0] {
            assert_eq!(c.step(d).z, first);
        }
    }

    fn sine(n: usize, omega: f64) -> Series {
        Series::from_univariate((1..=n).map(|t| (omega * t as f64).sin()).collect())
    }

    #[test]
    fn noiseless_sine_never_alarms() {
        let params = HyperParams::new(100, Candidate::new(60, 10, 2), 0.05, 4.5);
        let out = single_cp(&sine(600, 6.0 * std::f64::consts::PI / 75.0), &params).unwrap();
        assert_eq!(out.detection, None);
        assert_eq!(out.trace.len(), 600 - 60 + 1);
        assert!(out.trace.iter().all(|r| r.epsilon >= 0.0 && r.epsilon < 1e-12));
    }

    #[test]
    fn burn_in_alarms_are_suppressed() {
        // A jump inside the burn-in fires the chart but cannot be reported.
        let mut v: Vec<f64> = (1..=300).map(|t| (0.3 * t as f64).sin()).collect();
        for x in v.iter_mut().skip(50) {
            *x += 5.0;
        }
        let params = HyperParams::new(150, Candidate::new(20, 4, 2), 0.5, 0.5);
        let out = single_cp(&Series::from_univariate(v), &params).unwrap();
        assert!(out.trace.iter().any(|r| r.alarm && r.t <= 150));
        assert!(out.detection.is_none_or(|t| t > 150));
    }

    #[test]
    fn scan_matches_streaming_detector() {
        let v: Vec<f64> = (1..=400)
            .map(|t| (0.25 * t as f64).sin() + if t > 250 { 0.8 } else { 0.0 } + 0.05 * ((t * 7919) % 13) as f64)
            .collect();
        let s = Series::from_univariate(v);
        let cand = Candidate::new(40, 8, 2);
        let params = HyperParams::new(100, cand, 0.05, 3.0);
        let stream = single_cp(&s, &params).unwrap();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let errs = reconstruction_errors(&s, cand, 40..=400, exec).unwrap();
            for (row, e) in stream.trace.iter().zip(&errs) {
                assert_eq!(row.epsilon, *e);
            }
            assert_eq!(scan_errors(&errs, 40, 100, 0.05, 3.0), stream.detection);
        }
    }

    #[test]
    fn trace_csv_layout() {
        let rows = [
            TraceRow { t: 5, epsilon: 0.5, delta: None, z: None, mu: None, sigma_z: None, alarm: false },
            TraceRow { t: 6, epsilon: 1.0, delta: Some(0.5), z: Some(0.5), mu: Some(0.5), sigma_z: Some(0.0), alarm: true },
        ];
        let csv = trace_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,epsilon,delta,z,mu,sigma_z,alarm");
        assert_eq!(lines[1], "5,5e-1,,,,,0");
        assert_eq!(lines[2], "6,1e0,5e-1,5e-1,5e-1,0e0,1");
    }

    #[test]
    fn validation() {
        assert!(HyperParams::new(100, Candidate::new(40, 5, 6), 0.05, 4.5).validate(1).is_err());
        assert!(HyperParams::new(30, Candidate::new(40, 5, 2), 0.05, 4.5).validate(1).is_err());
        assert!(HyperParams::new(100, Candidate::new(40, 5, 2), 1.5, 4.5).validate(1).is_err());
        assert!(HyperParams::new(100, Candidate::new(40, 5, 2), 0.05, 0.0).validate(1).is_err());
        assert!(HyperParams::new(100, Candidate::new(40, 5, 2), 0.05, 4.5).validate(1).is_ok());
    }

    proptest! {
        #[test]
        fn welford_matches_batch_moments(v in proptest::collection::vec(-1e3f64..1e3, 1..2000)) {
            let mut w = Welford::default();
            for (i, &y) in v.iter().enumerate() {
                w.update(y);
                if i % 97 == 0 || i + 1 == v.len() {
                    let k = (i + 1) as f64;
                    let mean = v[..=i].iter().sum::<f64>() / k;
                    let var = v[..=i].iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
                    prop_assert!((w.mean - mean).abs() <= 1e-10 * (1.0 + mean.abs()));
                    prop_assert!((w.var - var).abs() <= 1e-10 * (1.0 + var));
                }
            }
        }

        #[test]
        fn epsilon_nonnegative(v in proptest::collection::vec(-10f64..10.0, 30)) {
            let x = batch(RealMatrix::from_row_slice(1, 30, &v));
            if let Ok(e) = window_error(&x, Candidate::new(30, 6, 2)) {
                prop_assert!(e >= 0.0);
            }
        }
    }
}
