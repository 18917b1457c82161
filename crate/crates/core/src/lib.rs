//! Nonparametric structural estimation for first-price sealed-bid auctions.
//!
//! The crate implements the two-step estimator of the private-valuation
//! density: bids are mapped to pseudo-valuations through an estimated inverse
//! equilibrium bidding strategy, and the pseudo-valuations are then kernel
//! smoothed. On top of the point estimator it provides a U-statistic variance
//! estimator, percentile and studentized bootstrap intervals, and bootstrap
//! uniform confidence bands, both for identical auctions with a fixed number
//! of bidders and for auctions with covariates and varying bidder counts.
//!
//! Module map:
//!
//! - [`dgp`]: Monte Carlo designs with exact valuation/bid samplers and the
//!   analytic truth used by the tests.
//! - [`kernels`]: compactly supported triweight kernels (orders 2 and 4).
//! - [`estimator`]: the homogeneous pipeline (empirical CDF, kernel bid
//!   density, pseudo-valuations, trimming, density estimate, bandwidths).
//! - [`variance`]: the triple-sum variance estimators and their brute-force
//!   references.
//! - [`oracles`]: closed-form asymptotic variance, variance-ratio constants
//!   and the exact inverse strategy of the power family.
//! - [`bootstrap`]: resampling, pointwise intervals and uniform bands.
//! - [`hetero`]: the covariate / random-bidder-count estimator.
//! - [`harness`]: coverage experiments, ratio tables and CSV estimation.

pub mod bootstrap;
pub mod dgp;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod hetero;
pub mod kernels;
pub mod oracles;
pub mod quadrature;
pub mod rng;
pub mod sample;
pub mod sum;
pub mod variance;

pub use error::{Error, Result};
pub use kernels::KernelSpec;
pub use sample::{AuctionSample, BidData};
