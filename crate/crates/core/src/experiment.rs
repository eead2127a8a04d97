//! Synthetic benchmark harness: runs CPDMD over a grid of chart settings and
//! the EWMA baseline on seeded catalog scenarios, and summarises each change
//! type with best-config and default-config rows.
//!
//! Hyperparameter selection and the error stream of a segment do not depend
//! on the chart settings, so they are computed once per segment start and
//! shared by every setting that reaches that start.

use std::collections::hash_map::Entry;
use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::baseline_ewma::{ewma_detect, EwmaBaselineParams};
use crate::detector::{window_error, AdaptiveEwma, Candidate};
use crate::embedding::make_window;
use crate::error::{Error, Result};
use crate::metrics::{arl0, arl1, prf1, EvalResult, MarginSpec};
use crate::par::Execution;
use crate::selection::{generate_grid, select_from_grid, GridSpec};
use crate::series::Series;
use crate::synth::{self, ChangeKind, ChangeScenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartConfig {
    pub lambda: f64,
    pub limit: f64,
}

impl ChartConfig {
    pub fn new(lambda: f64, limit: f64) -> Self {
        Self { lambda, limit }
    }

    pub fn tag(&self) -> String {
        format!("lambda={};L={}", self.lambda, self.limit)
    }

    /// Cartesian product of learning rates and limits.
    pub fn grid(lambdas: &[f64], limits: &[f64]) -> Vec<ChartConfig> {
        lambdas.iter().flat_map(|&l| limits.iter().map(move |&k| ChartConfig::new(l, k))).collect()
    }
}

pub const LAMBDAS: [f64; 2] = [0.05, 0.10];
pub const LIMITS: [f64; 5] = [1.5, 2.5, 3.5, 4.5, 5.5];

#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub burn_in: usize,
    pub grid: GridSpec,
    pub margins: MarginSpec,
    pub cpdmd: Vec<ChartConfig>,
    pub cpdmd_default: ChartConfig,
    pub ewma: Vec<ChartConfig>,
    pub ewma_default: ChartConfig,
    /// Seeded sequences per scenario.
    pub seeds: u64,
    pub base_seed: u64,
    /// Change-free runs per change type for the false-alarm columns; 0 skips them.
    pub null_runs: u64,
    pub null_length: usize,
    pub execution: Execution,
    /// Wall-clock budget; scenarios not started in time are skipped.
    pub budget: Option<Duration>,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            burn_in: 100,
            grid: GridSpec::default(),
            margins: MarginSpec::BENCHMARK,
            cpdmd: ChartConfig::grid(&LAMBDAS, &LIMITS),
            cpdmd_default: ChartConfig::new(0.05, 4.5),
            ewma: ChartConfig::grid(&LAMBDAS, &LIMITS),
            ewma_default: ChartConfig::new(0.05, 2.5),
            seeds: 100,
            base_seed: 0,
            null_runs: 0,
            null_length: 100_000,
            execution: Execution::default(),
            budget: None,
        }
    }
}

impl BenchmarkSpec {
    /// Only the default settings of both detectors.
    pub fn defaults_only(mut self) -> Self {
        self.cpdmd = vec![self.cpdmd_default];
        self.ewma = vec![self.ewma_default];
        self
    }

    fn with_defaults(list: &[ChartConfig], default: ChartConfig) -> Vec<ChartConfig> {
        let mut v = list.to_vec();
        if !v.contains(&default) {
            v.push(default);
        }
        v
    }
}

/// SplitMix64 finaliser, used to derive independent per-run seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of run `run` of the scenario called `name`. Independent of the
/// scenario's position in a list, so subsets reproduce the full run.
pub fn derive_seed(base: u64, name: &str, run: u64) -> u64 {
    let h = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3));
    splitmix64(splitmix64(base ^ h).wrapping_add(run))
}

/// Error stream of one segment, extended on demand.
struct SegmentErrors {
    series: Series,
    cand: Candidate,
    errors: Vec<f64>,
}

impl SegmentErrors {
    /// Error at relative time `t` (`t >= w`), or `None` past the end.
    fn get(&mut self, t: usize) -> Result<Option<f64>> {
        if t > self.series.len() {
            return Ok(None);
        }
        let w = self.cand.window;
        while self.errors.len() <= t - w {
            let next = w + self.errors.len();
            let stop = (next + 63).min(self.series.len());
            for s in next..=stop {
                self.errors.push(window_error(&make_window(&self.series, s, w)?, self.cand)?);
            }
        }
        Ok(Some(self.errors[t - w]))
    }
}

/// Restart driver for several chart settings at once; returns the
/// detections of each setting. Matches running the pipeline once per setting.
pub fn run_restarts(
    stream: &Series,
    burn_in: usize,
    grid_spec: &GridSpec,
    configs: &[ChartConfig],
    max_changes: usize,
) -> Result<Vec<Vec<usize>>> {
    let total = stream.len();
    let grid = generate_grid(burn_in, stream.dim(), grid_spec)?;
    let mut segments: HashMap<usize, Option<SegmentErrors>> = HashMap::new();
    let mut out = Vec::with_capacity(configs.len());
    for cfg in configs {
        let mut found = Vec::new();
        let mut s = 1;
        'segments: while found.len() < max_changes && total + 1 >= s + burn_in {
            let seg = match segments.entry(s) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => {
                    let seg = match select_from_grid(&stream.segment(s, s + burn_in - 1), &grid, Execution::Sequential) {
                        Ok(sel) => Some(SegmentErrors { series: stream.segment(s, total), cand: sel.best, errors: Vec::new() }),
                        Err(Error::AllCandidatesFailed) => None,
                        Err(e) => return Err(e),
                    };
                    e.insert(seg)
                }
            };
            let Some(seg) = seg.as_mut() else { break };
            let w = seg.cand.window;
            let mut chart = AdaptiveEwma::new(cfg.lambda, cfg.limit);
            let mut prev = seg.get(w)?.expect("segment holds a full burn-in");
            let mut t = w + 1;
            while let Some(eps) = seg.get(t)? {
                let step = chart.step(eps - prev);
                prev = eps;
                if step.alarm && t > burn_in {
                    let abs = s + t - 1;
                    found.push(abs);
                    s = abs;
                    continue 'segments;
                }
                t += 1;
            }
            break;
        }
        out.push(found);
    }
    Ok(out)
}

/// Detections of one seeded sequence under every setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceOutcome {
    pub scenario: String,
    pub kind: ChangeKind,
    pub seed: u64,
    pub tau: Option<usize>,
    pub cpdmd: Vec<Vec<usize>>,
    pub ewma: Vec<Option<usize>>,
    pub failed: bool,
}

pub fn run_sequence(scenario: &ChangeScenario, seed: u64, spec: &BenchmarkSpec) -> SequenceOutcome {
    let x = synth::generate(scenario, seed);
    let stream = Series::from_univariate(x.clone());
    let cp = BenchmarkSpec::with_defaults(&spec.cpdmd, spec.cpdmd_default);
    let ew = BenchmarkSpec::with_defaults(&spec.ewma, spec.ewma_default);
    let (cpdmd, mut failed) = match run_restarts(&stream, spec.burn_in, &spec.grid, &cp, usize::MAX) {
        Ok(d) => (d, false),
        Err(_) => (vec![Vec::new(); cp.len()], true),
    };
    let ewma = ew
        .iter()
        .map(|c| {
            let p = EwmaBaselineParams { burn_in: spec.burn_in, lambda: c.lambda, limit: c.limit };
            ewma_detect(&x, &p).unwrap_or_else(|_| {
                failed = true;
                None
            })
        })
        .collect();
    SequenceOutcome { scenario: scenario.name.clone(), kind: scenario.kind, seed, tau: scenario.tau, cpdmd, ewma, failed }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Cpdmd,
    Ewma,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Cpdmd => "CPDMD",
            Algorithm::Ewma => "EWMA",
        }
    }
}

/// First false alarm on a change-free stream, measured from the end of the
/// burn-in and censored at `length - burn_in`.
pub fn null_run_length(kind: ChangeKind, length: usize, seed: u64, algo: Algorithm, cfg: ChartConfig, spec: &BenchmarkSpec) -> Result<usize> {
    let sc = synth::null_scenario(kind, length);
    let x = synth::generate(&sc, seed);
    let first = match algo {
        Algorithm::Cpdmd => {
            let stream = Series::from_univariate(x);
            run_restarts(&stream, spec.burn_in, &spec.grid, &[cfg], 1)?.remove(0).first().copied()
        }
        Algorithm::Ewma => {
            let p = EwmaBaselineParams { burn_in: spec.burn_in, lambda: cfg.lambda, limit: cfg.limit };
            ewma_detect(&x, &p)?
        }
    };
    Ok(first.unwrap_or(length) - spec.burn_in)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// Change type, or `all`.
    pub scenario: String,
    pub algorithm: Algorithm,
    /// `best:<config>` or `default:<config>`.
    pub params: String,
    pub eval: EvalResult,
    pub arl1: Option<(f64, f64)>,
    pub arl0: Option<(f64, f64)>,
}

pub const TABLE_HEADER: &str = "scenario,algorithm,params,precision,recall,f1,arl1,sdrl1,arl0,sdrl0";

fn pair_cells(v: Option<(f64, f64)>) -> String {
    v.map_or_else(|| "NA,NA".to_string(), |(m, s)| format!("{m:.2},{s:.2}"))
}

impl TableRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.3},{:.3},{:.3},{},{}",
            self.scenario,
            self.algorithm.as_str(),
            self.params,
            self.eval.precision,
            self.eval.recall,
            self.eval.f1,
            pair_cells(self.arl1),
            pair_cells(self.arl0)
        )
    }
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = format!("{TABLE_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_line());
    }
    out
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub rows: Vec<TableRow>,
    pub outcomes: Vec<SequenceOutcome>,
    /// The budget ran out before every scenario was processed.
    pub overrun: bool,
    pub failures: usize,
}

impl BenchmarkResult {
    pub fn row(&self, scenario: &str, algorithm: Algorithm, default: bool) -> Option<&TableRow> {
        let prefix = if default { "default:" } else { "best:" };
        self.rows.iter().find(|r| r.scenario == scenario && r.algorithm == algorithm && r.params.starts_with(prefix))
    }
}

fn detections_of(o: &SequenceOutcome, algo: Algorithm, idx: usize) -> Vec<usize> {
    match algo {
        Algorithm::Cpdmd => o.cpdmd[idx].clone(),
        Algorithm::Ewma => o.ewma[idx].into_iter().collect(),
    }
}

/// Pooled P/R/F1 and delay statistics of one setting over some sequences.
pub fn evaluate_group(outcomes: &[&SequenceOutcome], algo: Algorithm, idx: usize, margins: MarginSpec) -> (EvalResult, Option<(f64, f64)>) {
    let mut evals = Vec::with_capacity(outcomes.len());
    let mut runs = Vec::new();
    for o in outcomes {
        let det = detections_of(o, algo, idx);
        let truth: Vec<usize> = o.tau.into_iter().collect();
        evals.push(prf1(&truth, &det, margins));
        if let Some(tau) = o.tau {
            runs.push((tau, det.first().copied()));
        }
    }
    let delays = if runs.is_empty() { None } else { arl1(&runs).ok() };
    (EvalResult::pooled(&evals), delays)
}

/// Runs every scenario for `spec.seeds` seeds and builds the summary table.
pub fn run_benchmark(scenarios: &[ChangeScenario], spec: &BenchmarkSpec) -> Result<BenchmarkResult> {
    if scenarios.is_empty() {
        return Err(Error::Empty);
    }
    generate_grid(spec.burn_in, 1, &spec.grid)?;
    let started = Instant::now();
    let mut outcomes = Vec::new();
    let mut overrun = false;
    for sc in scenarios {
        if spec.budget.is_some_and(|b| started.elapsed() > b) {
            overrun = true;
            break;
        }
        let jobs: Vec<u64> = (0..spec.seeds).map(|r| derive_seed(spec.base_seed, &sc.name, r)).collect();
        outcomes.extend(spec.execution.map(&jobs, |&seed| run_sequence(sc, seed, spec)));
    }
    let failures = outcomes.iter().filter(|o| o.failed).count();
    let rows = summarize(&outcomes, spec)?;
    Ok(BenchmarkResult { rows, outcomes, overrun, failures })
}

/// Best and default rows per change type (in catalog order) and over all
/// sequences.
pub fn summarize(outcomes: &[SequenceOutcome], spec: &BenchmarkSpec) -> Result<Vec<TableRow>> {
    let kinds: BTreeSet<usize> = outcomes
        .iter()
        .map(|o| ChangeKind::ALL.iter().position(|k| *k == o.kind).expect("known kind"))
        .collect();
    let mut groups: Vec<(String, Vec<ChangeKind>)> =
        kinds.iter().map(|&i| (ChangeKind::ALL[i].to_string(), vec![ChangeKind::ALL[i]])).collect();
    groups.push(("all".to_string(), kinds.iter().map(|&i| ChangeKind::ALL[i]).collect()));

    let cp = BenchmarkSpec::with_defaults(&spec.cpdmd, spec.cpdmd_default);
    let ew = BenchmarkSpec::with_defaults(&spec.ewma, spec.ewma_default);
    let mut null_cache: HashMap<(ChangeKind, u64, Algorithm, u64, u64), usize> = HashMap::new();
    let mut rows = Vec::new();
    for (label, kinds) in &groups {
        let members: Vec<&SequenceOutcome> = outcomes.iter().filter(|o| kinds.contains(&o.kind)).collect();
        for (algo, configs, default) in [(Algorithm::Cpdmd, &cp, spec.cpdmd_default), (Algorithm::Ewma, &ew, spec.ewma_default)] {
            let scored: Vec<(EvalResult, Option<(f64, f64)>)> =
                (0..configs.len()).map(|i| evaluate_group(&members, algo, i, spec.margins)).collect();
            let default_idx = configs.iter().position(|c| *c == default).expect("default present");
            // Highest F1; ties go to the earlier grid entry.
            let best_idx = (0..configs.len())
                .fold(0, |b, i| if scored[i].0.f1 > scored[b].0.f1 { i } else { b });
            let picks = if configs.len() == 1 {
                vec![("default", default_idx)]
            } else {
                vec![("best", best_idx), ("default", default_idx)]
            };
            for (which, idx) in picks {
                let cfg = configs[idx];
                let arl0_pair = if spec.null_runs > 0 {
                    let mut lengths = Vec::new();
                    for &kind in kinds {
                        for run in 0..spec.null_runs {
                            let seed = derive_seed(spec.base_seed, &format!("{kind}/null"), run);
                            let key = (kind, seed, algo, cfg.lambda.to_bits(), cfg.limit.to_bits());
                            let len = match null_cache.get(&key) {
                                Some(&l) => l,
                                None => {
                                    let l = null_run_length(kind, spec.null_length, seed, algo, cfg, spec)?;
                                    null_cache.insert(key, l);
                                    l
                                }
                            };
                            lengths.push(len);
                        }
                    }
                    Some(arl0(&lengths)?)
                } else {
                    None
                };
                rows.push(TableRow {
                    scenario: label.clone(),
                    algorithm: algo,
                    params: format!("{which}:{}", cfg.tag()),
                    eval: scored[idx].0,
                    arl1: scored[idx].1,
                    arl0: arl0_pair,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::PipelineConfig;

    #[test]
    fn shared_driver_matches_pipeline() {
        let configs = [ChartConfig::new(0.05, 4.5), ChartConfig::new(0.1, 1.5), ChartConfig::new(0.05, 2.5)];
        for (name, seed) in [("location/0.5", 3), ("variance/0.2", 8), ("mean/-2", 1)] {
            let sc = synth::lookup(name).unwrap();
            let stream = Series::from_univariate(synth::generate(&sc, seed));
            let shared = run_restarts(&stream, 100, &GridSpec::default(), &configs, usize::MAX).unwrap();
            for (cfg, got) in configs.iter().zip(&shared) {
                let p = PipelineConfig { lambda: cfg.lambda, limit: cfg.limit, ..PipelineConfig::default() };
                assert_eq!(&p.detect_all(&stream).unwrap().changepoints, got, "{name} {cfg:?}");
            }
        }
    }

    #[test]
    fn seeds_do_not_depend_on_list_position() {
        assert_eq!(derive_seed(7, "mean/3", 4), derive_seed(7, "mean/3", 4));
        assert_ne!(derive_seed(7, "mean/3", 4), derive_seed(7, "mean/4", 4));
        assert_ne!(derive_seed(7, "mean/3", 4), derive_seed(7, "mean/3", 5));
    }

    #[test]
    fn smoke_table() {
        let spec = BenchmarkSpec { seeds: 1, ..BenchmarkSpec::default() };
        let scenarios = [synth::lookup("mean/4").unwrap(), synth::lookup("amplitude/3").unwrap()];
        let res = run_benchmark(&scenarios, &spec).unwrap();
        let csv = table_csv(&res.rows);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TABLE_HEADER));
        // amplitude, mean, all; two algorithms; best + default each.
        assert_eq!(csv.lines().count(), 1 + 3 * 2 * 2);
        assert!(lines.all(|l| l.split(',').count() == 10));
        assert!(res.row("all", Algorithm::Cpdmd, true).is_some());
        assert!(!res.overrun);
    }

    #[test]
    fn single_config_gives_one_row_per_group() {
        let spec = BenchmarkSpec { seeds: 1, ..BenchmarkSpec::default() }.defaults_only();
        let res = run_benchmark(&[synth::lookup("mean/4").unwrap()], &spec).unwrap();
        assert_eq!(res.rows.len(), 2 * 2);
        assert!(res.rows.iter().all(|r| r.params.starts_with("default:")));
    }

    #[test]
    fn zero_budget_flags_overrun() {
        let spec = BenchmarkSpec { seeds: 1, budget: Some(Duration::ZERO), ..BenchmarkSpec::default() };
        std::thread::sleep(Duration::from_millis(1));
        let res = run_benchmark(&[synth::lookup("mean/4").unwrap()], &spec).unwrap();
        assert!(res.overrun && res.outcomes.is_empty());
    }

    #[test]
    fn censored_null_run() {
        let spec = BenchmarkSpec::default();
        let n = null_run_length(ChangeKind::Location, 400, 2, Algorithm::Cpdmd, ChartConfig::new(0.05, 1e6), &spec).unwrap();
        assert_eq!(n, 300);
    }
}
