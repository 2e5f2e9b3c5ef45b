//! Month-by-month cross-sectional regressions with HAC time-series
//! inference on the average slopes.
//!
//! Each month, bond excess returns are regressed on assigned post-ranking
//! betas (or covariances) plus an intercept. The reported premia are the
//! time-series means of the monthly slopes; t-statistics use a 12-lag
//! Newey-West variance of each slope series.

use crate::error::Error;
use crate::stats::hac::{self, HacSpec};
use crate::Result;
use nalgebra::{DMatrix, DVector};

/// One month's cross-section: excess returns and regressors (without the
/// intercept column) for the bonds present that month.
#[derive(Debug, Clone)]
pub struct CrossSection {
    pub label: String,
    pub y: Vec<f64>,
    /// n x k regressor matrix.
    pub x: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct FamaMacbethResult {
    /// Intercept followed by the k slope premia.
    pub premia: DVector<f64>,
    pub t_stats: DVector<f64>,
    pub avg_adj_r2: f64,
    /// Total bond-month observations across used cross-sections.
    pub observations: usize,
    pub months_used: usize,
    /// Labels of skipped cross-sections with the reason.
    pub skipped: Vec<String>,
}

/// Minimum cross-section size: regressors plus intercept plus five.
fn min_bonds(k: usize) -> usize {
    k + 1 + 5
}

pub fn fama_macbeth(sections: &[CrossSection], spec: HacSpec) -> Result<FamaMacbethResult> {
    let k = sections
        .first()
        .map(|s| s.x.ncols())
        .ok_or_else(|| Error::InsufficientData("no cross-sections supplied".into()))?;
    let mut slope_series: Vec<Vec<f64>> = vec![Vec::new(); k + 1];
    let mut adj_r2_sum = 0.0;
    let mut observations = 0usize;
    let mut skipped = Vec::new();

    for sec in sections {
        if sec.x.ncols() != k {
            return Err(Error::data(format!(
                "cross-section {} has {} regressors, expected {k}",
                sec.label,
                sec.x.ncols()
            )));
        }
        let n = sec.y.len();
        if sec.x.nrows() != n {
            return Err(Error::data(format!(
                "cross-section {} regressor/return length mismatch",
                sec.label
            )));
        }
        if n < min_bonds(k) {
            skipped.push(format!("{}: only {n} bonds", sec.label));
            continue;
        }
        let mut design = DMatrix::from_element(n, k + 1, 1.0);
        design.view_mut((0, 1), (n, k)).copy_from(&sec.x);
        let y = DVector::from_column_slice(&sec.y);
        let xtx = design.transpose() * &design;
        let eig = xtx.symmetric_eigenvalues();
        let max_eig = eig.iter().cloned().fold(0.0f64, f64::max);
        let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let coef = match xtx.clone().cholesky() {
            Some(c) if min_eig > 1e-10 * max_eig => c.solve(&(design.transpose() * &y)),
            _ => {
                skipped.push(format!("{}: degenerate cross-section", sec.label));
                continue;
            }
        };
        let resid = &y - &design * &coef;
        let ybar = y.mean();
        let tss: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
        let rss: f64 = resid.iter().map(|v| v * v).sum();
        let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };
        let adj = if n > k + 1 {
            1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - k as f64 - 1.0)
        } else {
            r2
        };
        adj_r2_sum += adj;
        observations += n;
        for i in 0..=k {
            slope_series[i].push(coef[i]);
        }
    }

    let months_used = slope_series[0].len();
    if months_used < 24 {
        return Err(Error::InsufficientData(format!(
            "only {months_used} usable cross-sections; need at least 24"
        )));
    }
    let mut premia = DVector::zeros(k + 1);
    let mut t_stats = DVector::zeros(k + 1);
    for i in 0..=k {
        let series = &slope_series[i];
        let mean = series.iter().sum::<f64>() / months_used as f64;
        let var = hac::nw_variance(series, spec)?;
        premia[i] = mean;
        t_stats[i] = if var > 0.0 { mean / var.sqrt() } else { 0.0 };
    }
    Ok(FamaMacbethResult {
        premia,
        t_stats,
        avg_adj_r2: adj_r2_sum / months_used as f64,
        observations,
        months_used,
        skipped,
    })
}
