//! Spatial first differences for cross-sectional data.
//!
//! Units are ordered into channels ([`ordering`]), differenced between
//! neighbours ([`differencing`]) and fitted by least squares
//! ([`estimation`]) with autocorrelation-robust covariances ([`inference`]).
//! [`simulation`] and [`robustness`] hold the Monte Carlo engine and the
//! rotation, double-difference and extreme-bounds checks.

// `!(v > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod differencing;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod inference;
pub mod linalg;
pub mod ordering;
pub mod robustness;
pub mod simulation;

pub use dataset::{SpatialDataset, Unit};
pub use differencing::{decompose_bias, difference, DifferencedDesign};
pub use error::{Error, Result};
pub use estimation::{fit, ols, robinson_fit, EstimatorKind, FitResult};
pub use geometry::Point;
pub use inference::SeMethod;
pub use ordering::{assign_channels, order_1d, order_grid, Axis, GridDirection, OrderedPath};
