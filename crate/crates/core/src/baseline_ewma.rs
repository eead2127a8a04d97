//! Classical EWMA chart on the raw univariate stream, with mean and standard
//! deviation fixed from the burn-in prefix.

use serde::{Deserialize, Serialize};

use crate::detector::validate_chart;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EwmaBaselineParams {
    pub burn_in: usize,
    pub lambda: f64,
    pub limit: f64,
}

impl Default for EwmaBaselineParams {
    fn default() -> Self {
        Self { burn_in: 100, lambda: 0.05, limit: 2.5 }
    }
}

/// Burn-in mean and sample standard deviation.
pub fn burn_in_moments(stream: &[f64], burn_in: usize) -> Result<(f64, f64)> {
    if burn_in < 2 || stream.len() < burn_in {
        return Err(Error::InsufficientHistory { needed: burn_in.max(2), available: stream.len() });
    }
    let prefix = &stream[..burn_in];
    let mu = prefix.iter().sum::<f64>() / burn_in as f64;
    let var = prefix.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (burn_in - 1) as f64;
    Ok((mu, var.sqrt()))
}

/// Chart statistic `Z_1..Z_T` started from `Z_0 = mu`.
pub fn ewma_path(stream: &[f64], mu: f64, lambda: f64) -> Vec<f64> {
    stream
        .iter()
        .scan(mu, |z, &x| {
            *z = (1.0 - lambda) * *z + lambda * x;
            Some(*z)
        })
        .collect()
}

/// First `t > T0` with `|Z_t - mu| > L sigma_Z(t)`.
pub fn ewma_detect(stream: &[f64], params: &EwmaBaselineParams) -> Result<Option<usize>> {
    validate_chart(params.lambda, params.limit)?;
    if stream.len() <= params.burn_in {
        return Err(Error::InsufficientHistory { needed: params.burn_in + 1, available: stream.len() });
    }
    if stream.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (mu, sd) = burn_in_moments(stream, params.burn_in)?;
    if sd == 0.0 {
        return Err(Error::DegenerateBurnIn);
    }
    let l = params.lambda;
    let z = ewma_path(stream, mu, l);
    for (i, &zt) in z.iter().enumerate().skip(params.burn_in) {
        let t = (i + 1) as f64;
        let sigma_z = sd * (l / (2.0 - l) * (1.0 - (1.0 - l).powf(2.0 * t))).sqrt();
        let band = params.limit * sigma_z;
        if zt > mu + band || zt < mu - band {
            return Ok(Some(i + 1));
        }
    }
    Ok(None)
}
