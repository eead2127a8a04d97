//! Empirical checks of the eigen-perturbation bound between consecutive
//! windowed DMD operators, and per-step cost measurements.
//!
//! Consecutive windows share all but one snapshot pair. With `G = X X^T` of
//! the new lagged matrix and residuals `r = y - A x` under the old operator,
//! the change of the full operator is exactly
//! `E = r_new x_new^T G^-1 - r_old x_old^T G^-1`, where the first term is the
//! new-snapshot prediction error and the second undoes the dropped pair.
//! `G^-1` is taken from SVD factors of the new lagged matrix that are updated
//! incrementally (drop a column, then append one) from the old factors.

use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::detector::{window_error, Candidate};
use crate::dmd::dmd_operator_full;
use crate::embedding::{hankelize, make_window};
use crate::error::{Error, Result};
use crate::linalg::{self, RealMatrix, SvdFactors, SINGULAR_CUTOFF};
use crate::series::Series;

/// Eigenvector matrices at or above this condition number count as defective.
pub const MAX_EIGVEC_CONDITION: f64 = 1e12;

fn drop_tiny(f: SvdFactors<f64>) -> SvdFactors<f64> {
    let smax = f.s.first().copied().unwrap_or(0.0);
    let keep = f.s.iter().take_while(|&&s| smax > 0.0 && s >= SINGULAR_CUTOFF * smax).count();
    SvdFactors {
        u: f.u.columns(0, keep).into_owned(),
        s: f.s[..keep].to_vec(),
        v: f.v.columns(0, keep).into_owned(),
    }
}

/// Factors of `X` without its first column, from the factors of `X`.
pub fn svd_drop_first_column(f: &SvdFactors<f64>) -> Result<SvdFactors<f64>> {
    let (k, r) = f.v.shape();
    if k < 2 {
        return Err(Error::InsufficientHistory { needed: 2, available: k });
    }
    if r == 0 {
        return Ok(SvdFactors { u: f.u.clone(), s: vec![], v: RealMatrix::zeros(k - 1, 0) });
    }
    let qr = f.v.rows(1, k - 1).into_owned().qr();
    let (q, rr) = (qr.q(), qr.r());
    let mut small = rr.transpose();
    for (i, &s) in f.s.iter().enumerate() {
        small.row_mut(i).scale_mut(s);
    }
    let inner = linalg::full_svd(&small)?;
    Ok(drop_tiny(SvdFactors { u: &f.u * inner.u, s: inner.s, v: q * inner.v }))
}

/// Factors of `[X, x]` from the factors of `X`.
pub fn svd_append_column(f: &SvdFactors<f64>, x: &[f64]) -> Result<SvdFactors<f64>> {
    let n = f.u.nrows();
    if x.len() != n {
        return Err(Error::ShapeMismatch { expected: format!("{n} entries"), actual: format!("{}", x.len()) });
    }
    let x = RealMatrix::from_column_slice(n, 1, x);
    let (k, r) = f.v.shape();
    let proj = f.u.transpose() * &x;
    let resid = &x - &f.u * &proj;
    let rho = resid.norm();
    let scale = x.norm().max(f.s.first().copied().unwrap_or(0.0));
    let grow = rho > SINGULAR_CUTOFF * scale;
    let rows = r + usize::from(grow);
    let mut kmat = RealMatrix::zeros(rows, r + 1);
    for i in 0..r {
        kmat[(i, i)] = f.s[i];
        kmat[(i, r)] = proj[(i, 0)];
    }
    let mut basis = f.u.clone();
    if grow {
        kmat[(r, r)] = rho;
        basis = basis.insert_column(r, 0.0);
        basis.set_column(r, &(resid / rho).column(0));
    }
    let inner = linalg::full_svd(&kmat)?;
    let mut vext = RealMatrix::zeros(k + 1, r + 1);
    vext.view_mut((0, 0), (k, r)).copy_from(&f.v);
    vext[(k, r)] = 1.0;
    Ok(drop_tiny(SvdFactors { u: basis * inner.u, s: inner.s, v: vext * inner.v }))
}

fn hankel_snapshots(stream: &Series, t: usize, w: usize, d: usize) -> Result<RealMatrix> {
    Ok(hankelize(&make_window(stream, t, w)?, d)?.data)
}

/// Operator change between the windows ending at `t` and `t + 1`.
#[derive(Debug, Clone)]
pub struct Perturbation {
    /// Full operator of the window ending at `t`.
    pub operator: RealMatrix,
    /// Full operator of the window ending at `t + 1`.
    pub next_operator: RealMatrix,
    /// Difference of the two operators.
    pub direct: RealMatrix,
    /// Two-term closed form built from incrementally updated factors.
    pub closed_form: RealMatrix,
    /// Norm of the new-snapshot term alone.
    pub prediction_term_norm: f64,
    /// Norm of the dropped-pair term.
    pub removal_term_norm: f64,
}

impl Perturbation {
    /// `||direct - closed_form||_F / (1 + ||direct||_F)`.
    pub fn disagreement(&self) -> f64 {
        (&self.direct - &self.closed_form).norm() / (1.0 + self.direct.norm())
    }
}

pub fn perturbation_matrix(stream: &Series, t: usize, w: usize, d: usize) -> Result<Perturbation> {
    if t + 1 > stream.len() {
        return Err(Error::InsufficientHistory { needed: t + 1, available: stream.len() });
    }
    let h0 = hankel_snapshots(stream, t, w, d)?;
    let h1 = hankel_snapshots(stream, t + 1, w, d)?;
    let m = h0.ncols();
    if m < 3 {
        return Err(Error::InsufficientHistory { needed: 3, available: m });
    }
    let a0 = dmd_operator_full(&h0)?;
    let a1 = dmd_operator_full(&h1)?;
    let direct = &a1 - &a0;

    let x0 = h0.columns(0, m - 1).into_owned();
    let f0 = linalg::truncated_svd(&x0, x0.nrows().min(x0.ncols()))?;
    if f0.rank() == 0 {
        return Err(Error::DegenerateWindow);
    }
    let x_new: Vec<f64> = h0.column(m - 1).iter().copied().collect();
    let f1 = svd_append_column(&svd_drop_first_column(&f0)?, &x_new)?;
    if f1.rank() == 0 {
        return Err(Error::DegenerateWindow);
    }

    let (x_old, y_old) = (h0.column(0), h0.column(1));
    let (x_new, y_new) = (h1.column(m - 2), h1.column(m - 1));
    let r_old = y_old - &a0 * x_old;
    let r_new = y_new - &a0 * x_new;

    let mut u_sinv = f1.u.clone();
    let mut u_sinv2 = f1.u.clone();
    for (j, &s) in f1.s.iter().enumerate() {
        u_sinv.column_mut(j).scale_mut(1.0 / s);
        u_sinv2.column_mut(j).scale_mut(1.0 / (s * s));
    }
    let v_last = f1.v.row(f1.v.nrows() - 1);
    let new_row = v_last * u_sinv.transpose();
    let old_row = x_old.transpose() * &u_sinv2 * f1.u.transpose();
    let prediction = &r_new * new_row;
    let removal = &r_old * old_row;
    Ok(Perturbation {
        prediction_term_norm: linalg::norm2(&prediction)?,
        removal_term_norm: linalg::norm2(&removal)?,
        closed_form: prediction - removal,
        operator: a0,
        next_operator: a1,
        direct,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub t: usize,
    pub e_norm: f64,
    pub cond_phi: f64,
    pub eig_gap: f64,
    pub max_drift: f64,
    pub bound_ok: bool,
    /// Largest `||phi~ - phi|| / (||E|| / gap)` over paired eigenvectors.
    pub eigvec_ratio: f64,
}

pub const RECORD_HEADER: &str = "t,e_norm,cond_phi,eig_gap,max_drift,bound_ok";

pub fn records_csv(records: &[PerturbationRecord]) -> String {
    let mut out = format!("{RECORD_HEADER}\n");
    for r in records {
        let _ = writeln!(out, "{},{:e},{:e},{:e},{:e},{}", r.t, r.e_norm, r.cond_phi, r.eig_gap, r.max_drift, r.bound_ok);
    }
    out
}

fn min_distance(z: Complex64, set: &[Complex64]) -> f64 {
    set.iter().map(|l| (z - l).norm()).fold(f64::INFINITY, f64::min)
}

/// Bound check for an operator `a` and its perturbation `a_tilde`.
pub fn bauer_fike_pair(t: usize, a: &RealMatrix, a_tilde: &RealMatrix) -> Result<PerturbationRecord> {
    let eig = linalg::eig_general(a)?;
    let cond_phi = linalg::condition_number(&eig.vectors)?;
    if cond_phi.is_nan() || cond_phi >= MAX_EIGVEC_CONDITION {
        return Err(Error::NonDiagonalisable { condition: cond_phi });
    }
    let e = a_tilde - a;
    let e_norm = linalg::norm2(&e)?;
    let pert = linalg::eig_general(a_tilde)?;
    let max_drift = pert.values.iter().map(|&z| min_distance(z, &eig.values)).fold(0.0, f64::max);
    let n = eig.values.len();
    let mut eig_gap = f64::INFINITY;
    for j in 0..n {
        for k in j + 1..n {
            eig_gap = eig_gap.min((eig.values[j] - eig.values[k]).norm());
        }
    }
    let bound_ok = max_drift <= cond_phi * e_norm * (1.0 + 1e-8);

    // Greedy pairing on |<phi~, phi>|, largest overlaps first.
    let mut overlaps = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let ip = pert.vectors.column(i).dotc(&eig.vectors.column(j)).norm();
            overlaps.push((ip, i, j));
        }
    }
    overlaps.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut used_i, mut used_j) = (vec![false; n], vec![false; n]);
    let mut worst: f64 = 0.0;
    for (_, i, j) in overlaps {
        if used_i[i] || used_j[j] {
            continue;
        }
        used_i[i] = true;
        used_j[j] = true;
        let diff = (pert.vectors.column(i) - eig.vectors.column(j)).norm();
        worst = worst.max(if diff == 0.0 { 0.0 } else { diff * eig_gap / e_norm });
    }
    Ok(PerturbationRecord { t, e_norm, cond_phi, eig_gap, max_drift, bound_ok, eigvec_ratio: worst })
}

/// Bound check between the windows ending at `t` and `t + 1`.
pub fn check_bauer_fike(stream: &Series, t: usize, w: usize, d: usize) -> Result<PerturbationRecord> {
    let p = perturbation_matrix(stream, t, w, d)?;
    bauer_fike_pair(t, &p.operator, &p.next_operator)
}

#[derive(Debug, Clone, Default)]
pub struct BoundSummary {
    pub records: Vec<PerturbationRecord>,
    /// Steps skipped because the operator was not diagonalisable.
    pub skipped: Vec<usize>,
    pub violations: usize,
    /// Largest closed-form disagreement seen.
    pub max_disagreement: f64,
}

/// Checks every step `t` in `range`.
pub fn verify_bound(stream: &Series, range: std::ops::RangeInclusive<usize>, w: usize, d: usize) -> Result<BoundSummary> {
    let mut out = BoundSummary::default();
    for t in range {
        let p = perturbation_matrix(stream, t, w, d)?;
        out.max_disagreement = out.max_disagreement.max(p.disagreement());
        match bauer_fike_pair(t, &p.operator, &p.next_operator) {
            Ok(rec) => {
                out.violations += usize::from(!rec.bound_ok);
                out.records.push(rec);
            }
            Err(Error::NonDiagonalisable { .. }) => out.skipped.push(t),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Dominant per-step cost `pd (w-d) min(pd, w-d)`.
pub fn theoretical_cost(p: usize, w: usize, d: usize) -> f64 {
    let (a, b) = ((p * d) as f64, w.saturating_sub(d) as f64);
    a * b * a.min(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityRow {
    pub p: usize,
    pub w: usize,
    pub d: usize,
    pub r: usize,
    pub theoretical_cost: f64,
    pub seconds_per_step: f64,
}

pub const COMPLEXITY_HEADER: &str = "p,w,d,r,theoretical_cost,seconds_per_step";

pub fn complexity_csv(rows: &[ComplexityRow]) -> String {
    let mut out = format!("{COMPLEXITY_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{:e}", r.p, r.w, r.d, r.r, r.theoretical_cost, r.seconds_per_step);
    }
    out
}

/// Times `steps` detector steps on seeded noise for each configuration
/// `(p, w, d)`; the rank is `min(pd, w-d)`. Each configuration is timed
/// `repeats` times and the median kept.
pub fn complexity_bench(configs: &[(usize, usize, usize)], steps: usize, repeats: usize, seed: u64) -> Result<Vec<ComplexityRow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(configs.len());
    for &(p, w, d) in configs {
        let r = (p * d).min(w - d).max(1);
        let cand = Candidate::new(w, d, r);
        cand.validate(p)?;
        let len = w + steps;
        let data: Vec<f64> = (0..len * p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let stream = Series::new(p, data)?;
        let windows = (w..w + steps).map(|t| make_window(&stream, t, w)).collect::<Result<Vec<_>>>()?;
        let mut times = Vec::with_capacity(repeats.max(1));
        for _ in 0..repeats.max(1) {
            let start = Instant::now();
            for x in &windows {
                std::hint::black_box(window_error(x, cand)?);
            }
            times.push(start.elapsed().as_secs_f64() / steps.max(1) as f64);
        }
        times.sort_by(f64::total_cmp);
        rows.push(ComplexityRow {
            p,
            w,
            d,
            r,
            theoretical_cost: theoretical_cost(p, w, d),
            seconds_per_step: times[times.len() / 2],
        });
    }
    Ok(rows)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Noisy sine used by the bound checks.
pub fn noisy_sine(len: usize, omega: f64, sigma: f64, seed: u64) -> Series {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Series::from_univariate(
        (1..=len)
            .map(|t| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (omega * t as f64).sin() + sigma * z
            })
            .collect(),
    )
}
