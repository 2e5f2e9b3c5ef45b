//! JSON configuration for the synthetic generator and the pipeline runner.

use bondlab_core::calendar::Month;
use bondlab_core::signals::IlliqSpec;
use bondlab_core::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Synthetic-universe parameters. Prices follow lognormal daily
/// factor-driven paths; observed trades add an i.i.d. bid-ask bounce of
/// relative half-width `noise`, so the expected monthly price-reversal
/// illiquidity (in percent-squared units) is `(100 * noise)^2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub bonds: usize,
    pub issuers: usize,
    pub months: usize,
    /// First sample month, "YYYY-MM".
    pub start: String,
    /// Monthly factor means; the length sets the number of factors.
    pub factor_means: Vec<f64>,
    /// Monthly factor covariance, row major.
    pub factor_cov: Vec<Vec<f64>>,
    /// Standard deviation of bond loadings around their centers.
    pub beta_dispersion: f64,
    /// Monthly idiosyncratic return volatility.
    pub idio_vol: f64,
    /// Per-bond probability of trading on a given business day.
    pub trade_probability: f64,
    /// Mean of the exponential volume draw added to the $10,000 floor.
    pub volume_mean: f64,
    /// Bid-ask bounce relative half-width.
    pub noise: f64,
    /// Annual coupon rate in percent; zero makes zero-coupon bonds.
    pub coupon_rate: f64,
    pub coupon_frequency: u32,
    /// Monthly risk-free rate, decimal.
    pub risk_free: f64,
    /// Monthly standard deviation of the rating random walk.
    pub rating_drift: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 1,
            bonds: 200,
            issuers: 24,
            months: 60,
            start: "2012-01".to_string(),
            factor_means: vec![0.004],
            factor_cov: vec![vec![4.0e-4]],
            beta_dispersion: 0.3,
            idio_vol: 0.01,
            trade_probability: 1.0,
            volume_mean: 50_000.0,
            noise: 0.001,
            coupon_rate: 5.0,
            coupon_frequency: 2,
            risk_free: 0.002,
            rating_drift: 0.2,
        }
    }
}

impl SyntheticConfig {
    pub fn start_month(&self) -> Result<Month> {
        parse_month(&self.start)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bonds == 0 || self.issuers == 0 || self.months == 0 {
            return Err(Error::config("bond, issuer, and month counts must be positive"));
        }
        if self.trade_probability <= 0.0 || self.trade_probability > 1.0 {
            return Err(Error::config("trade probability must lie in (0, 1]"));
        }
        let k = self.factor_means.len();
        if k == 0 || self.factor_cov.len() != k || self.factor_cov.iter().any(|r| r.len() != k) {
            return Err(Error::config(
                "factor covariance must be square and match the mean vector",
            ));
        }
        let cov =
            nalgebra::DMatrix::from_fn(k, k, |i, j| self.factor_cov[i][j]);
        if cov.cholesky().is_none() {
            return Err(Error::config("factor covariance is not positive definite"));
        }
        if self.idio_vol < 0.0 || self.beta_dispersion < 0.0 || self.noise < 0.0 {
            return Err(Error::config("volatility parameters must be nonnegative"));
        }
        self.start_month()?;
        Ok(())
    }
}

/// Pipeline runner configuration: input files, sample span, and the
/// estimation knobs carried through every stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub trades: PathBuf,
    pub master: PathBuf,
    pub ratings: PathBuf,
    pub risk_free: PathBuf,
    pub curve: Option<PathBuf>,
    pub industry_map: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// "YYYY-MM" inclusive bounds.
    pub start: String,
    pub end: String,
    pub hac_lags: usize,
    pub fm_lags: usize,
    pub var5_window: usize,
    pub var5_min_obs: usize,
    pub illiq: IlliqSpec,
    /// Cross-sectional winsorization tail for ILLIQ.
    pub winsor_tail: f64,
    /// Emit the GLS panels alongside OLS.
    pub gls: bool,
    pub mc_draws: usize,
    pub bootstrap_replications: usize,
    pub bootstrap_block: usize,
    pub frontier_grid: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            trades: PathBuf::from("trades.csv"),
            master: PathBuf::from("master.csv"),
            ratings: PathBuf::from("ratings.csv"),
            risk_free: PathBuf::from("risk_free.csv"),
            curve: None,
            industry_map: None,
            out_dir: PathBuf::from("out"),
            start: "2012-01".to_string(),
            end: "2016-12".to_string(),
            hac_lags: 3,
            fm_lags: 12,
            var5_window: 36,
            var5_min_obs: 24,
            illiq: IlliqSpec::default(),
            winsor_tail: 0.005,
            gls: true,
            mc_draws: 20_000,
            bootstrap_replications: 200,
            bootstrap_block: 12,
            frontier_grid: 50,
            seed: 1,
        }
    }
}

impl RunConfig {
    pub fn span(&self) -> Result<(Month, Month)> {
        let start = parse_month(&self.start)?;
        let end = parse_month(&self.end)?;
        if end < start {
            return Err(Error::config(format!(
                "end month {} precedes start month {}",
                self.end, self.start
            )));
        }
        Ok((start, end))
    }

    pub fn validate(&self) -> Result<()> {
        self.span()?;
        if self.frontier_grid < 2 {
            return Err(Error::config("frontier grid needs at least 2 points"));
        }
        if !(0.0..0.5).contains(&self.winsor_tail) {
            return Err(Error::config("winsorization tail must lie in [0, 0.5)"));
        }
        Ok(())
    }
}

pub fn parse_month(s: &str) -> Result<Month> {
    let (y, m) = s
        .split_once('-')
        .ok_or_else(|| Error::config(format!("month `{s}` is not YYYY-MM")))?;
    let year: i32 = y
        .parse()
        .map_err(|_| Error::config(format!("month `{s}` is not YYYY-MM")))?;
    let month: u32 = m
        .parse()
        .map_err(|_| Error::config(format!("month `{s}` is not YYYY-MM")))?;
    if !(1..=12).contains(&month) {
        return Err(Error::config(format!("month `{s}` is out of range")));
    }
    Ok(Month::new(year, month))
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("cannot parse config {}: {e}", path.display())))
}
