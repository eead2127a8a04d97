//! Owned multivariate time series stored row-major (one observation per row).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    dim: usize,
    data: Vec<f64>,
}

impl Series {
    /// Builds a series from a flat row-major buffer of `len * dim` values.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("series dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch {
                expected: format!("multiple of {dim} values"),
                actual: format!("{} values", data.len()),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { dim, data })
    }

    pub fn from_univariate(values: Vec<f64>) -> Self {
        Self { dim: 1, data: values }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or(Error::Empty)?;
        let mut data = Vec::with_capacity(dim * rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::ShapeMismatch {
                    expected: format!("{dim} components"),
                    actual: format!("{} components in observation {}", row.len(), i + 1),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Observation `x_t` with 1-based `t`.
    pub fn observation(&self, t: usize) -> &[f64] {
        let i = t - 1;
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copy of observations `start..=end` (1-based, inclusive).
    pub fn segment(&self, start: usize, end: usize) -> Series {
        assert!(start >= 1 && start <= end + 1 && end <= self.len(), "segment {start}..={end} out of range");
        Series {
            dim: self.dim,
            data: self.data[(start - 1) * self.dim..end * self.dim].to_vec(),
        }
    }

    pub fn scaled(&self, c: f64) -> Series {
        Series {
            dim: self.dim,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }

    /// Component `j` as a contiguous vector.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.data.iter().skip(j).step_by(self.dim).copied().collect()
    }
}
