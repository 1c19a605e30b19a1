//! Change-point detection for sequences of symmetric positive-definite
//! matrices.
//!
//! The test statistic is a weighted CUSUM-max built from a kernel
//! h(x, y) = etr(-x - y) J_nu(-x, y), where J_nu is the Bessel function of
//! two matrix arguments evaluated through its zonal-polynomial series.
//! Inference uses a permutation bootstrap on the cached kernel Gram matrix;
//! multiple change points come from recursive binary segmentation. Matrix
//! distribution samplers and a financial covariance pipeline support
//! simulation studies and end-to-end runs on price data.
//!
//! Entry points:
//! - [`kernel::gram`] builds the n x n Gram matrix once per dataset;
//! - [`cpstat::statistic_profile`] turns it into the per-split statistic;
//! - [`resample::permutation_pvalue`] attaches a bootstrap p-value;
//! - [`segment::binary_segmentation`] finds multiple change points;
//! - [`pipeline`] ingests prices into covariance series.
//!
//! Runnable walkthroughs live in the `examples/` directory; the `hankel-cpd`
//! binary wraps the same operations as batch subcommands.

pub mod cli;
pub mod cpstat;
pub mod distributions;
pub mod error;
pub mod kernel;
pub mod pipeline;
pub mod resample;
pub mod seeding;
pub mod segment;
pub mod specfun;

pub use error::{Error, Result};
