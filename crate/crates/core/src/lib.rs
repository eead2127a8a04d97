//! Online changepoint detection by monitoring the reconstruction error of
//! rank-truncated dynamic mode decomposition (DMD) over Hankel-embedded
//! sliding windows.
//!
//! The crate is layered bottom up:
//!
//! * [`linalg`] holds the dense kernels (SVD, non-symmetric eigensolver, pseudo-inverse).
//! * [`embedding`] and [`dmd`] turn a window of observations into a low-rank reconstruction.
//! * [`detector`] tracks reconstruction-error increments with an adaptive EWMA chart.
//! * [`selection`] and [`pipeline`] pick hyperparameters on a burn-in prefix and restart after each detection.
//! * [`synth`], [`metrics`], [`baseline_ewma`] and [`experiment`] reproduce the synthetic benchmark.
//! * [`theory`] checks eigenvalue perturbation bounds and per-step cost empirically.
//!
//! ```
//! use cpdmd::{pipeline::PipelineConfig, synth, Series};
//!
//! let scenario = synth::lookup("location/1").unwrap();
//! let stream = Series::from_univariate(synth::generate(&scenario, 7));
//! let report = PipelineConfig::default().detect_all(&stream).unwrap();
//! assert!(report.changepoints.iter().any(|&t| (300..=330).contains(&t)));
//! ```

pub mod baseline_ewma;
pub mod detector;
pub mod dmd;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod selection;
pub mod series;
pub mod synth;
pub mod theory;

pub use error::{Error, Result};
pub use par::Execution;
pub use series::Series;
