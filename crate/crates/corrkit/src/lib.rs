//! Nonlinear cross-correlation estimators.
//!
//! A correlator scores a pair of sample vectors with `f(x, y) = h(x + y) - h(x - y)`
//! for an even, convex `h`. Under jointly Gaussian inputs the expected score
//! `g(R)` is a monotone function of the true correlation `R`, so a calibrated
//! inverse `g⁻¹` turns raw scores into correlation estimates.
//!
//! Modules:
//! - [`pwl`]: the correlator family and score evaluation.
//! - [`price`]: the expected-score curve `g(R)` via Price's theorem.
//! - [`sampling`]: deterministic paired sample generation.
//! - [`wht`]: normalized fast Walsh–Hadamard transform front-end.
//! - [`calibration`]: Monte-Carlo calibration of `g⁻¹`.
//! - [`metrics`]: Cramér–Rao bound, error sweeps and SNR.
//! - [`cli`]: batch command-line front-end.

// NaN must fail parameter checks, so `!(x > 0.0)` is intended.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod csvio;
pub mod error;
pub mod metrics;
pub mod price;
pub mod pwl;
mod quad;
pub mod sampling;
pub mod wht;

pub use calibration::{CalibrationModel, CalibrationTable};
pub use error::{Error, Result};
pub use metrics::SweepResult;
pub use price::GCurve;
pub use pwl::{CorrelatorSpec, PwlMixture};
pub use sampling::{Family, RngStream, SampleBatch};
pub use wht::WhtVector;
