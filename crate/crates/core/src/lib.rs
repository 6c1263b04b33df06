//! Blind linear prediction of stationary Gaussian time series.
//!
//! A stationary zero-mean Gaussian process with summable covariances has a
//! spectral density bounded between two positive constants. Under that
//! assumption the best linear prediction of a block of unseen values from a
//! finite window of observed past is a Toeplitz system solve, and the same
//! projection admits an equivalent form through the inverse spectral density.
//! This crate implements both routes, a plug-in estimator that works from a
//! single observed path without knowing the covariance, and a Monte Carlo
//! harness that measures how fast the plug-in predictor approaches the
//! optimal one.

pub mod blind_predictor;
pub mod covariance_estimation;
mod error;
pub mod experiment_harness;
pub mod gaussian_simulator;
pub mod model;
pub mod spectral_model;
pub mod toeplitz_algebra;

pub use error::{Error, Result};

/// Grid resolution used for spectral extrema and quadrature unless a caller
/// overrides it.
pub const DEFAULT_GRID: usize = 4096;
