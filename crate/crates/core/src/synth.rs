//! Synthetic univariate streams with a single change at `tau`:
//! `x_t = sum_k alpha_k sin(omega_k t) + beta t + gamma + N(0, sigma^2)`, `t = 1..T`.
//!
//! The catalog covers seven change types with three change sizes each, and a
//! change-free variant per type for false-alarm runs.

use std::f64::consts::PI;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TAU: usize = 300;
pub const DEFAULT_LENGTH: usize = 600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalParams {
    pub omegas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub beta: f64,
    pub gamma: f64,
    pub sigma: f64,
}

impl SignalParams {
    pub fn noise(sigma: f64) -> Self {
        Self { omegas: vec![], alphas: vec![], beta: 0.0, gamma: 0.0, sigma }
    }

    pub fn sine(alpha: f64, omega: f64, sigma: f64) -> Self {
        Self { omegas: vec![omega], alphas: vec![alpha], ..Self::noise(sigma) }
    }

    /// Number of periodic components.
    pub fn periodicities(&self) -> usize {
        self.omegas.len()
    }

    /// Noise-free value at time `t`.
    pub fn mean_at(&self, t: usize) -> f64 {
        let t = t as f64;
        let periodic: f64 = self.alphas.iter().zip(&self.omegas).map(|(a, w)| a * (w * t).sin()).sum();
        periodic + self.beta * t + self.gamma
    }

    fn validate(&self) -> Result<()> {
        if self.omegas.len() != self.alphas.len() {
            return Err(Error::InvalidParameter("omegas and alphas differ in length".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise level {} must be non-negative", self.sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChangeKind {
    Periodicity,
    Location,
    Amplitude,
    Trend,
    Mean,
    Variance,
    Double,
}

impl ChangeKind {
    pub const ALL: [ChangeKind; 7] = [
        ChangeKind::Periodicity,
        ChangeKind::Location,
        ChangeKind::Amplitude,
        ChangeKind::Trend,
        ChangeKind::Mean,
        ChangeKind::Variance,
        ChangeKind::Double,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChangeKind::Periodicity => "periodicity",
            ChangeKind::Location => "location",
            ChangeKind::Amplitude => "amplitude",
            ChangeKind::Trend => "trend",
            ChangeKind::Mean => "mean",
            ChangeKind::Variance => "variance",
            ChangeKind::Double => "double",
        }
    }

    fn pre(self) -> SignalParams {
        match self {
            ChangeKind::Periodicity => SignalParams::sine(1.0, 6.0 * PI / 75.0, 0.1),
            ChangeKind::Location => SignalParams::sine(1.0, 4.0 * PI / 75.0, 0.1),
            ChangeKind::Amplitude => SignalParams::sine(1.0, 13.0 * PI / 150.0, 0.1),
            ChangeKind::Trend => SignalParams { beta: 1.0 / 30.0, ..SignalParams::sine(1.0, 10.0 * PI / 75.0, 0.1) },
            ChangeKind::Mean => SignalParams::noise(1.0),
            ChangeKind::Variance => SignalParams::noise(0.1),
            ChangeKind::Double => SignalParams {
                omegas: vec![9.0 * PI / 75.0, 6.0 * PI / 75.0],
                alphas: vec![1.0, 1.0],
                ..SignalParams::noise(0.1)
            },
        }
    }

    /// Post-change parameters with their catalog labels.
    fn posts(self) -> Vec<(String, SignalParams)> {
        let pre = self.pre();
        let pi75 = |k: u32| (format!("{k}π/75"), f64::from(k) * PI / 75.0);
        match self {
            ChangeKind::Periodicity => [5, 7, 8]
                .into_iter()
                .map(|k| {
                    let (label, w) = pi75(k);
                    (label, SignalParams { omegas: vec![w], ..pre.clone() })
                })
                .collect(),
            ChangeKind::Location => [("-0.5", -0.5), ("0.5", 0.5), ("1", 1.0)]
                .into_iter()
                .map(|(l, g)| (l.to_string(), SignalParams { gamma: g, ..pre.clone() }))
                .collect(),
            ChangeKind::Amplitude => [("0.5", 0.5), ("2", 2.0), ("3", 3.0)]
                .into_iter()
                .map(|(l, a)| (l.to_string(), SignalParams { alphas: vec![a], ..pre.clone() }))
                .collect(),
            ChangeKind::Trend => [("-1/30", -1.0 / 30.0), ("0", 0.0), ("2/30", 2.0 / 30.0)]
                .into_iter()
                .map(|(l, b)| (l.to_string(), SignalParams { beta: b, gamma: 10.0, ..pre.clone() }))
                .collect(),
            ChangeKind::Mean => [("-2", -2.0), ("3", 3.0), ("4", 4.0)]
                .into_iter()
                .map(|(l, g)| (l.to_string(), SignalParams { gamma: g, ..pre.clone() }))
                .collect(),
            ChangeKind::Variance => [("0.2", 0.2), ("0.3", 0.3), ("0.4", 0.4)]
                .into_iter()
                .map(|(l, s)| (l.to_string(), SignalParams { sigma: s, ..pre.clone() }))
                .collect(),
            ChangeKind::Double => [(3, 5), (9, 3), (9, 4)]
                .into_iter()
                .map(|(a, b)| {
                    let ((la, wa), (lb, wb)) = (pi75(a), pi75(b));
                    (format!("({la},{lb})"), SignalParams { omegas: vec![wa, wb], ..pre.clone() })
                })
                .collect(),
        }
    }
}

impl fmt::Display for ChangeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeScenario {
    pub name: String,
    pub kind: ChangeKind,
    pub pre: SignalParams,
    pub post: SignalParams,
    /// First time governed by `post`; `None` for change-free streams.
    pub tau: Option<usize>,
    pub length: usize,
}

impl ChangeScenario {
    pub fn validate(&self) -> Result<()> {
        self.pre.validate()?;
        self.post.validate()?;
        if self.length == 0 {
            return Err(Error::InvalidParameter("scenario length must be positive".into()));
        }
        if let Some(tau) = self.tau {
            if tau == 0 || tau > self.length {
                return Err(Error::InvalidParameter(format!("tau {tau} outside 1..={}", self.length)));
            }
        }
        Ok(())
    }

    fn params_at(&self, t: usize) -> &SignalParams {
        match self.tau {
            Some(tau) if t >= tau => &self.post,
            _ => &self.pre,
        }
    }

    /// Same scenario with a different length; the change point is dropped if
    /// it falls outside.
    pub fn with_length(&self, length: usize) -> Self {
        Self { length, tau: self.tau.filter(|&t| t <= length), ..self.clone() }
    }
}

/// Draws `x_1..x_T`. Noise comes from a ChaCha8 stream seeded with `seed`;
/// one standard normal is drawn per step whatever the noise level.
pub fn generate(scenario: &ChangeScenario, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (1..=scenario.length)
        .map(|t| {
            let p = scenario.params_at(t);
            let z: f64 = StandardNormal.sample(&mut rng);
            p.mean_at(t) + p.sigma * z
        })
        .collect()
}

/// The 21 change scenarios (`tau = 300`, `T = 600`), grouped by kind.
pub fn scenario_catalog() -> Vec<ChangeScenario> {
    ChangeKind::ALL
        .iter()
        .flat_map(|&kind| {
            let pre = kind.pre();
            kind.posts().into_iter().map(move |(label, post)| ChangeScenario {
                name: format!("{kind}/{label}"),
                kind,
                pre: pre.clone(),
                post,
                tau: Some(DEFAULT_TAU),
                length: DEFAULT_LENGTH,
            })
        })
        .collect()
}

/// Change-free stream following the pre-change parameters of `kind`.
pub fn null_scenario(kind: ChangeKind, length: usize) -> ChangeScenario {
    let pre = kind.pre();
    ChangeScenario { name: format!("{kind}/null"), kind, post: pre.clone(), pre, tau: None, length }
}

pub fn catalog_names() -> Vec<String> {
    let mut names: Vec<String> = scenario_catalog().into_iter().map(|s| s.name).collect();
    names.extend(ChangeKind::ALL.iter().map(|k| format!("{k}/null")));
    names
}

/// Finds a catalog or null scenario by name; `pi` is accepted for `π`.
pub fn lookup(name: &str) -> Result<ChangeScenario> {
    let wanted = name.trim().replace("pi", "π").replace(' ', "");
    if let Some(kind) = wanted.strip_suffix("/null") {
        if let Some(&k) = ChangeKind::ALL.iter().find(|k| k.as_str() == kind) {
            return Ok(null_scenario(k, DEFAULT_LENGTH));
        }
    }
    scenario_catalog().into_iter().find(|s| s.name == wanted).ok_or_else(|| Error::UnknownScenario {
        name: name.to_string(),
        valid: catalog_names().join(", "),
    })
}
