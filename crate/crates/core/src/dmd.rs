//! Rank-truncated exact DMD of a snapshot matrix.
//!
//! Snapshots are the columns of an `n x m` matrix. The operator is fitted
//! between the lagged matrices `X` (columns `1..m-1`) and `Y` (columns
//! `2..m`), projected on the leading `r` left singular vectors of `X`, and the
//! snapshots are rebuilt from the first column alone by propagating the modes
//! forward with unit time step.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, ComplexMatrix, RealMatrix};

/// Eigenvalues with smaller modulus are dropped: their logarithm diverges.
pub const MIN_EIGENVALUE_MODULUS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct DmdDecomposition {
    /// Number of modes actually retained (at most the requested rank).
    pub rank_used: usize,
    /// DMD modes, one column per retained eigenvalue.
    pub modes: ComplexMatrix,
    /// Discrete-time eigenvalues.
    pub eigenvalues: Vec<Complex64>,
    /// Continuous-time eigenvalues `ln(lambda)` on the principal branch.
    pub dynamics: Vec<Complex64>,
    pub amplitudes: DVector<Complex64>,
    /// Real part of the rebuilt snapshot matrix, same shape as the input.
    pub reconstruction: RealMatrix,
    /// Frobenius norm of the discarded imaginary part of the reconstruction.
    pub imaginary_residue: f64,
}

fn lagged(snapshots: &RealMatrix) -> Result<(RealMatrix, RealMatrix)> {
    let m = snapshots.ncols();
    if snapshots.nrows() == 0 {
        return Err(Error::Empty);
    }
    if m < 2 {
        return Err(Error::InsufficientHistory { needed: 2, available: m });
    }
    linalg::check_finite(snapshots)?;
    Ok((snapshots.columns(0, m - 1).into_owned(), snapshots.columns(1, m - 1).into_owned()))
}

/// DMD at rank `rank`.
///
/// `rank` may be anything in `1..=min(n, m)`; it is capped at `m - 1`, the
/// column count of the lagged matrices, and further at the numerical rank of
/// `X`.
pub fn dmd(snapshots: &RealMatrix, rank: usize) -> Result<DmdDecomposition> {
    let (n, m) = snapshots.shape();
    let (x, y) = lagged(snapshots)?;
    let max = n.min(m);
    if rank == 0 || rank > max {
        return Err(Error::RankOutOfRange { requested: rank, max });
    }
    let svd = linalg::truncated_svd(&x, rank.min(m - 1))?;
    let k = svd.rank();
    if k == 0 {
        return Err(Error::DegenerateWindow);
    }

    // Y V S^-1, shared by the projected operator and the modes.
    let mut yvs = &y * &svd.v;
    for j in 0..k {
        yvs.column_mut(j).scale_mut(1.0 / svd.s[j]);
    }
    let a_tilde = svd.u.transpose() * &yvs;
    let eig = linalg::eig_general(&a_tilde)?;

    let keep: Vec<usize> = (0..k).filter(|&j| eig.values[j].norm() >= MIN_EIGENVALUE_MODULUS).collect();
    if keep.is_empty() {
        return Err(Error::DegenerateWindow);
    }
    let w = ComplexMatrix::from_fn(k, keep.len(), |i, j| eig.vectors[(i, keep[j])]);
    let eigenvalues: Vec<Complex64> = keep.iter().map(|&j| eig.values[j]).collect();
    let dynamics: Vec<Complex64> = eigenvalues.iter().map(|l| l.ln()).collect();
    let modes = linalg::to_complex(&yvs) * w;

    let x1 = linalg::to_complex(&snapshots.columns(0, 1).into_owned());
    let amplitudes: DVector<Complex64> = (linalg::pinv(&modes)? * x1).column(0).into_owned();

    let r = keep.len();
    let time = ComplexMatrix::from_fn(r, m, |j, col| amplitudes[j] * (dynamics[j] * col as f64).exp());
    let full = &modes * time;
    let reconstruction = full.map(|c| c.re);
    let imaginary_residue = full.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
    if reconstruction.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }

    Ok(DmdDecomposition {
        rank_used: r,
        modes,
        eigenvalues,
        dynamics,
        amplitudes,
        reconstruction,
        imaginary_residue,
    })
}

/// Unprojected best-fit operator `Y X^+`.
pub fn dmd_operator_full(snapshots: &RealMatrix) -> Result<RealMatrix> {
    let (x, y) = lagged(snapshots)?;
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateWindow);
    }
    Ok(y * linalg::pinv(&x)?)
}
