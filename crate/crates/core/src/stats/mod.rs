//! Statistical machinery: HAC covariance, squared-Sharpe inference,
//! two-pass cross-sectional regressions, Fama-MacBeth, and bootstrap
//! resampling.

pub mod bootstrap;
pub mod csr;
pub mod famamacbeth;
pub mod hac;
pub mod sharpe;

pub use hac::{nw_hac, HacSpec};
