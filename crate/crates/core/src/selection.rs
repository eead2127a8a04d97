//! Hyperparameter selection on the burn-in prefix: every grid candidate is
//! scored by its average reconstruction error and the smallest one wins.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::detector::{reconstruction_errors, Candidate};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::series::Series;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Window lengths as fractions of the burn-in length.
    pub window_fractions: Vec<f64>,
    /// Delay orders as fractions of the burn-in length.
    pub order_fractions: Vec<f64>,
    /// Ranks are `rank_multiplier * k` for `k = 1..=max(p, rank_levels)`.
    pub rank_multiplier: usize,
    pub rank_levels: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            window_fractions: vec![0.4, 0.6, 0.8],
            order_fractions: vec![0.05, 0.1, 0.2, 0.4],
            rank_multiplier: 2,
            rank_levels: 2,
        }
    }
}

impl GridSpec {
    /// Ranks `multiplier * {1..p}` only, without the extra levels.
    pub fn strict(window_fractions: Vec<f64>, order_fractions: Vec<f64>, rank_multiplier: usize) -> Self {
        Self { window_fractions, order_fractions, rank_multiplier, rank_levels: 1 }
    }

    pub fn ranks(&self, p: usize) -> Vec<usize> {
        (1..=p.max(self.rank_levels)).map(|k| k * self.rank_multiplier).collect()
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

/// All admissible `(w, d, r)` triplets in ascending lexicographic order.
pub fn generate_grid(burn_in: usize, p: usize, spec: &GridSpec) -> Result<Vec<Candidate>> {
    if burn_in < 10 {
        return Err(Error::InvalidParameter(format!("burn-in {burn_in} shorter than 10")));
    }
    if p == 0 || spec.rank_multiplier == 0 {
        return Err(Error::InvalidParameter("dimension and rank multiplier must be positive".into()));
    }
    let in_unit = |f: &f64| *f > 0.0 && *f <= 1.0;
    if !spec.window_fractions.iter().all(in_unit) || !spec.order_fractions.iter().all(in_unit) {
        return Err(Error::InvalidParameter("grid fractions must lie in (0, 1]".into()));
    }
    let mut grid = Vec::new();
    for &fw in &spec.window_fractions {
        let w = round_half_up(fw * burn_in as f64).clamp(2, burn_in);
        for &fd in &spec.order_fractions {
            let d = round_half_up(fd * burn_in as f64).clamp(1, w);
            for r in spec.ranks(p) {
                let cand = Candidate::new(w, d, r);
                if cand.validate(p).is_ok() {
                    grid.push(cand);
                }
            }
        }
    }
    grid.sort();
    grid.dedup();
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate: Candidate,
    /// Mean error over `t = w..=T0`; infinite if any step failed.
    pub avg_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub best: Candidate,
    pub best_error: f64,
    pub table: Vec<CandidateScore>,
}

impl Selection {
    pub fn table_csv(&self) -> String {
        let mut out = String::from("w,d,r,avg_error\n");
        for s in &self.table {
            let c = s.candidate;
            let _ = writeln!(out, "{},{},{},{:e}", c.window, c.order, c.rank, s.avg_error);
        }
        out
    }
}

/// Average error of one candidate over the burn-in.
pub fn score_candidate(burn_in: &Series, cand: Candidate) -> f64 {
    match reconstruction_errors(burn_in, cand, cand.window..=burn_in.len(), Execution::Sequential) {
        Ok(errs) if !errs.is_empty() => {
            let avg = errs.iter().sum::<f64>() / errs.len() as f64;
            if avg.is_finite() { avg } else { f64::INFINITY }
        }
        _ => f64::INFINITY,
    }
}

/// Scores `grid` on `burn_in` and returns the argmin, ties going to the
/// lexicographically smallest candidate.
pub fn select_from_grid(burn_in: &Series, grid: &[Candidate], exec: Execution) -> Result<Selection> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let table: Vec<CandidateScore> = exec
        .map(grid, |&c| CandidateScore { candidate: c, avg_error: score_candidate(burn_in, c) });
    let best = table
        .iter()
        .filter(|s| s.avg_error.is_finite())
        .min_by(|a, b| a.avg_error.total_cmp(&b.avg_error).then(a.candidate.cmp(&b.candidate)))
        .copied()
        .ok_or(Error::AllCandidatesFailed)?;
    Ok(Selection { best: best.candidate, best_error: best.avg_error, table })
}

pub fn select_hyperparams(burn_in: &Series, spec: &GridSpec, exec: Execution) -> Result<Selection> {
    let grid = generate_grid(burn_in.len(), burn_in.dim(), spec)?;
    select_from_grid(burn_in, &grid, exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_at_hundred() {
        let g = generate_grid(100, 1, &GridSpec::default()).unwrap();
        assert!(g.contains(&Candidate::new(40, 5, 2)));
        assert!(g.contains(&Candidate::new(80, 40, 2)));
        assert!(g.iter().all(|c| c.rank <= c.order.min(c.window - c.order + 1)));
        assert!(g.windows(2).all(|p| p[0] < p[1]));
        // (40, 40) leaves a single Hankel column, so no rank survives there.
        assert!(!g.iter().any(|c| c.window == 40 && c.order == 40));
        assert_eq!(g.len(), 22);
        let strict = generate_grid(100, 1, &GridSpec::strict(vec![0.4, 0.6, 0.8], vec![0.05, 0.1, 0.2, 0.4], 2)).unwrap();
        assert_eq!(strict.len(), 11);
    }

    #[test]
    fn hand_computed_small_grid() {
        let spec = GridSpec::strict(vec![0.5], vec![0.2], 2);
        assert_eq!(generate_grid(10, 1, &spec).unwrap(), vec![Candidate::new(5, 2, 2)]);
        assert_eq!(generate_grid(10, 1, &GridSpec { rank_levels: 2, ..spec }).unwrap(), vec![Candidate::new(5, 2, 2)]);
    }

    #[test]
    fn empty_grid() {
        // d = round(0.05 * 10) = 1, so p*d = 1 < r = 2.
        let spec = GridSpec::strict(vec![0.5], vec![0.05], 2);
        assert_eq!(generate_grid(10, 1, &spec).unwrap_err(), Error::EmptyGrid);
        assert!(generate_grid(9, 1, &GridSpec::default()).is_err());
    }

    fn sine(n: usize) -> Series {
        let omega = 2.0 * std::f64::consts::PI / 25.0;
        Series::from_univariate((1..=n).map(|t| (omega * t as f64).sin()).collect())
    }

    #[test]
    fn sine_prefers_rank_two() {
        let grid = vec![Candidate::new(40, 1, 1), Candidate::new(40, 10, 1), Candidate::new(40, 10, 2)];
        let sel = select_from_grid(&sine(100), &grid, Execution::default()).unwrap();
        assert_eq!(sel.best, Candidate::new(40, 10, 2));
        assert!(sel.best_error <= 1e-6);
        assert!(sel.table.iter().all(|s| s.avg_error >= sel.best_error));
    }

    #[test]
    fn single_candidate_and_ties() {
        let s = sine(60);
        let one = [Candidate::new(30, 5, 2)];
        assert_eq!(select_from_grid(&s, &one, Execution::Sequential).unwrap().best, one[0]);
        // A constant stream is reconstructed exactly by any rank, so all tie at 0.
        let flat = Series::from_univariate(vec![3.0; 60]);
        let grid = [Candidate::new(30, 10, 2), Candidate::new(30, 5, 2), Candidate::new(40, 5, 2)];
        let sel = select_from_grid(&flat, &grid, Execution::Parallel).unwrap();
        assert_eq!(sel.best, Candidate::new(30, 5, 2));
    }

    #[test]
    fn failures_score_infinity() {
        let zeros = Series::from_univariate(vec![0.0; 40]);
        let grid = [Candidate::new(20, 5, 2)];
        assert_eq!(select_from_grid(&zeros, &grid, Execution::Sequential).unwrap_err(), Error::AllCandidatesFailed);
    }

    #[test]
    fn order_independent() {
        let s = Series::from_univariate((1..=100).map(|t| (0.3 * t as f64).sin() + 0.01 * (t % 7) as f64).collect());
        let mut grid = generate_grid(100, 1, &GridSpec::default()).unwrap();
        let a = select_from_grid(&s, &grid, Execution::Sequential).unwrap();
        grid.reverse();
        let b = select_from_grid(&s, &grid, Execution::Parallel).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.best_error, b.best_error);
        assert!(a.table_csv().starts_with("w,d,r,avg_error\n40,5,2,"));
    }
}
