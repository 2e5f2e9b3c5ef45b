//! Newey-West HAC covariance with the Bartlett kernel.
//!
//! For a demeaned multivariate series `x_t` the long-run covariance is
//!
//! ```text
//! S = G_0 + sum_{j=1..L} (1 - j/(L+1)) (G_j + G_j')
//! G_j = (1/T) sum_{t=j+1..T} (x_t - xbar)(x_{t-j} - xbar)'
//! ```
//!
//! which estimates `Avar(sqrt(T) * xbar)`. The covariance of the sample
//! mean itself is `S / T`. The Bartlett weights keep `S` positive
//! semidefinite by construction.

use crate::error::Error;
use crate::Result;
use nalgebra::{DMatrix, DVector};

/// Kernel and lag choice. The Bartlett kernel is the only one supported;
/// the default lag count is three, with twelve used for Fama-MacBeth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct HacSpec {
    pub lags: usize,
}

impl Default for HacSpec {
    fn default() -> Self {
        HacSpec { lags: 3 }
    }
}

impl HacSpec {
    pub fn new(lags: usize) -> Self {
        HacSpec { lags }
    }
}

/// Long-run covariance `S` of a `T x M` series (rows are time).
pub fn long_run_cov(series: &DMatrix<f64>, spec: HacSpec) -> Result<DMatrix<f64>> {
    let (t, m) = series.shape();
    if t <= spec.lags + 1 {
        return Err(Error::InsufficientData(format!(
            "need T > L+1, got T={t}, L={}",
            spec.lags
        )));
    }
    let tf = t as f64;
    let mean: DVector<f64> = series.row_mean().transpose();
    let mut centered = series.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut s = &centered.transpose() * &centered / tf;
    for j in 1..=spec.lags {
        let w = 1.0 - j as f64 / (spec.lags as f64 + 1.0);
        let lead = centered.rows(j, t - j);
        let lag = centered.rows(0, t - j);
        let gamma = lead.transpose() * lag / tf;
        let sym = &gamma + gamma.transpose();
        s += w * sym;
    }
    let _ = m;
    Ok(s)
}

/// HAC covariance matrix of the sample mean: `S / T`.
pub fn nw_hac(series: &DMatrix<f64>, spec: HacSpec) -> Result<DMatrix<f64>> {
    let t = series.nrows() as f64;
    Ok(long_run_cov(series, spec)? / t)
}

/// HAC variance of the mean of a scalar series.
pub fn nw_variance(series: &[f64], spec: HacSpec) -> Result<f64> {
    let mat = DMatrix::from_column_slice(series.len(), 1, series);
    Ok(nw_hac(&mat, spec)?[(0, 0)])
}
