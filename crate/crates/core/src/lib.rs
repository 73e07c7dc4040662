// SPDX-License-Identifier: MIT OR Apache-2.0

//! Multiscale change-point estimation for piecewise-constant signals observed
//! under dependent noise.
//!
//! The pipeline estimates the long-run variance of the errors from
//! differences of block means ([`variance`]), calibrates a threshold from the
//! null distribution of a multiscale statistic ([`multiscale`]), and returns
//! the step function with the fewest jumps that passes the test, fitted by
//! constrained least squares ([`segmentation`]).

// `!(a <= b)` is used on purpose so that NaN lands on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod multiscale;
pub mod noise;
pub mod segmentation;
pub mod signal;
pub mod variance;

pub use error::{Error, Result};
pub use multiscale::{penalty, v_stat, ScaleConfig, ValueInterval};
pub use noise::{NoiseModel, Seed};
pub use segmentation::{brute_force_detect, detect, detect_scaled, DetectorConfig, Fit, Threshold};
pub use signal::{cp_distance, signal_distance, StepSignal};
pub use variance::{block_diff_lrv, iid_diff_lrv, LrvEstimate, VarianceEstimator};
