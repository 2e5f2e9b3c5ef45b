//! Corporate bond asset-pricing laboratory.
//!
//! The crate turns raw intraday trade records into monthly bond excess returns,
//! builds traded and mimicking risk factors, forms cross-sectional test
//! portfolios, and evaluates factor models with misspecification-robust
//! time-series and cross-sectional inference.
//!
//! Pipeline stages map onto the top-level modules:
//!
//! * [`ingest`]: trade/master parsing and filter chains
//! * [`returns`]: daily prices, month-boundary selection, monthly excess returns
//! * [`signals`]: bond-level sorting signals (VaR5, ILLIQ, REV, credit spread)
//! * [`factors`]: MKTB, DRF/CRF/LRF-style sorts, mimicking portfolios
//! * [`testassets`]: rating/maturity/spread/industry portfolios, post-ranking betas
//! * [`stats`]: HAC covariance, squared-Sharpe inference, two-pass CSRs,
//!   Fama-MacBeth, bootstrap

pub mod calendar;
pub mod curve;
pub mod daycount;
pub mod error;
pub mod factors;
pub mod ingest;
pub mod returns;
pub mod signals;
pub mod stats;
pub mod testassets;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
