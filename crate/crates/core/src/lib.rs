// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change-point tests for functional and vector-valued time series, calibrated
//! with the sequential non-overlapping block bootstrap.
//!
//! The crate is organised bottom-up:
//!
//! - [`hilbert`]: curves on a quadrature grid, inner products, partial-sum deviations.
//! - [`statistics`]: the functional CUSUM statistic and the Cramér–von Mises
//!   change-point statistic over weighted indicator embeddings.
//! - [`bootstrap`]: block plans, resampling, bootstrap replicates and the full test.
//! - [`simulation`]: FAR(1) and AR(1) generators plus structural-change alternatives.
//! - [`experiments`]: seeded Monte Carlo size/power studies and reference tables.
//! - [`io`]: CSV ingestion of hydrological series and `cpb/1` report documents.

#![forbid(unsafe_code)]
// `!(x < y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod hilbert;
pub mod io;
pub mod rng;
pub mod simulation;
pub mod statistics;

pub use error::{CpbError, Result};
pub use hilbert::{Curve, FunctionalSample, Grid};
pub use statistics::{CusumResult, VectorSample, WeightSpec};
