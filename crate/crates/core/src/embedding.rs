//! Sliding windows, Hankel (time-delay) embedding and the causal unroll back
//! from a Hankel reconstruction to a window.

use crate::error::{shape, Error, Result};
use crate::linalg::RealMatrix;
use crate::series::Series;

/// The last `w` observations as a `p x w` matrix, oldest column first.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedBatch {
    pub p: usize,
    pub w: usize,
    pub data: RealMatrix,
}

/// `d` stacked delay copies per component: a `(p*d) x (w-d+1)` matrix whose
/// `d x (w-d+1)` blocks are Hankel.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelBatch {
    pub p: usize,
    pub w: usize,
    pub d: usize,
    pub data: RealMatrix,
}

impl WindowedBatch {
    pub fn from_matrix(data: RealMatrix) -> Result<Self> {
        let (p, w) = data.shape();
        if p == 0 || w == 0 {
            return Err(Error::Empty);
        }
        Ok(Self { p, w, data })
    }
}

impl HankelBatch {
    /// Wraps a matrix (typically a DMD reconstruction) as a Hankel batch for
    /// window length `w`, checking the shape.
    pub fn from_matrix(p: usize, w: usize, d: usize, data: RealMatrix) -> Result<Self> {
        check_hankel_shape(p, w, d, &data)?;
        Ok(Self { p, w, d, data })
    }
}

fn check_hankel_shape(p: usize, w: usize, d: usize, data: &RealMatrix) -> Result<()> {
    if d == 0 || d > w || data.shape() != (p * d, w - d + 1) {
        let (rows, cols) = (p * d, (w + 1).saturating_sub(d));
        return Err(Error::ShapeMismatch {
            expected: shape(rows, cols),
            actual: shape(data.nrows(), data.ncols()),
        });
    }
    Ok(())
}

/// Window of observations `x_{t-w+1} .. x_t` (1-based `t`).
pub fn make_window(history: &Series, t: usize, w: usize) -> Result<WindowedBatch> {
    if w == 0 {
        return Err(Error::InvalidParameter("window length must be positive".into()));
    }
    if t < w {
        return Err(Error::InsufficientHistory { needed: w, available: t });
    }
    if t > history.len() {
        return Err(Error::InsufficientHistory { needed: t, available: history.len() });
    }
    let p = history.dim();
    let start = t - w + 1;
    let data = RealMatrix::from_fn(p, w, |i, k| history.observation(start + k)[i]);
    Ok(WindowedBatch { p, w, data })
}

/// Delay embedding of order `d`: block `j`, row `i`, column `k` holds
/// component `j` of the window at column `i + k`.
pub fn hankelize(x: &WindowedBatch, d: usize) -> Result<HankelBatch> {
    let (p, w) = (x.p, x.w);
    if d == 0 || d > w {
        return Err(Error::OrderOutOfRange { order: d, window: w });
    }
    let cols = w - d + 1;
    let data = RealMatrix::from_fn(p * d, cols, |row, k| {
        let (j, i) = (row / d, row % d);
        x.data[(j, i + k)]
    });
    Ok(HankelBatch { p, w, d, data })
}

/// Causal unroll: for each block, its first row followed by the last `d-1`
/// entries of its last column.
pub fn unroll(h: &HankelBatch) -> Result<WindowedBatch> {
    let (p, w, d) = (h.p, h.w, h.d);
    check_hankel_shape(p, w, d, &h.data)?;
    let cols = w - d + 1;
    let data = RealMatrix::from_fn(p, w, |j, k| {
        if k < cols {
            h.data[(j * d, k)]
        } else {
            h.data[(j * d + k - cols + 1, cols - 1)]
        }
    });
    Ok(WindowedBatch { p, w, data })
}
