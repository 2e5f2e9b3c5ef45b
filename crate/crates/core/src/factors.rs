//! Traded bond factors, aggregate liquidity series, and mimicking
//! portfolios for nontraded factors.
//!
//! MKTB is the amount-outstanding-weighted mean excess return over all
//! eligible bonds. DRF and LRF come from independent 5x5 rating-by-signal
//! sorts: within each rating quintile take the value-weighted return of
//! the highest signal quintile minus the lowest, then average across
//! rating quintiles. CRF averages three rating-direction long-shorts, one
//! per sort (VaR5, ILLIQ, REV), each going long the lowest-rated
//! (highest credit risk) quintile and short the highest-rated.
//!
//! All return values stay in decimal units; report emission scales.

use crate::calendar::Month;
use crate::error::Error;
use crate::returns::{DailyPrice, ReturnPanel};
use crate::signals::SignalSeries;
use crate::stats::bootstrap;
use crate::stats::sharpe::{ols_multi, slope_f_test};
use crate::Result;
use chrono::Datelike;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};

/// One named monthly factor series, decimal units.
#[derive(Debug, Clone)]
pub struct FactorSeries {
    pub name: String,
    pub values: BTreeMap<Month, f64>,
    /// Months where construction was impossible, with the reason.
    pub gaps: Vec<(Month, String)>,
}

impl FactorSeries {
    pub fn new(name: &str) -> Self {
        FactorSeries {
            name: name.to_string(),
            values: BTreeMap::new(),
            gaps: Vec::new(),
        }
    }

    pub fn get(&self, month: Month) -> Option<f64> {
        self.values.get(&month).copied()
    }
}

/// Value-weighted mean excess return over all eligible bonds in `month`.
/// `None` marks an empty month.
pub fn mktb(panel: &ReturnPanel, month: Month) -> Option<f64> {
    let obs = panel.month_slice(month);
    let mut wsum = 0.0;
    let mut acc = 0.0;
    for o in &obs {
        if o.amount_outstanding > 0.0 {
            wsum += o.amount_outstanding;
            acc += o.amount_outstanding * o.excess_return;
        }
    }
    if wsum > 0.0 {
        Some(acc / wsum)
    } else {
        None
    }
}

pub fn compute_mktb(panel: &ReturnPanel) -> FactorSeries {
    let mut series = FactorSeries::new("MKTB");
    for &m in &panel.months {
        match mktb(panel, m) {
            Some(v) => {
                series.values.insert(m, v);
            }
            None => series.gaps.push((m, "no eligible bonds".into())),
        }
    }
    series
}

/// Quantile bin per id with ties assigned to the lower bin. Breakpoints
/// are order statistics of the pooled signal values.
pub fn quantile_bins(values: &[(String, f64)], n_bins: usize) -> Result<HashMap<String, usize>> {
    if n_bins == 0 {
        return Err(Error::config("need at least one bin"));
    }
    let mut sorted: Vec<f64> = values.iter().map(|(_, v)| *v).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < n_bins {
        return Err(Error::data(format!(
            "only {} distinct signal values for {} bins",
            distinct.len(),
            n_bins
        )));
    }
    let n = sorted.len();
    // Upper edge of each lower bin; a value equal to an edge stays below it.
    let breakpoints: Vec<f64> = (1..n_bins).map(|q| sorted[q * n / n_bins - 1]).collect();
    Ok(values
        .iter()
        .map(|(id, v)| {
            let bin = breakpoints.iter().filter(|&&b| b < *v).count();
            (id.clone(), bin)
        })
        .collect())
}

/// Output of one month's independent 5x5 rating-by-signal sort.
#[derive(Debug, Clone)]
pub struct DoubleSortOutcome {
    /// Average of the surviving per-rating-quintile long-shorts; `None`
    /// when fewer than three rating quintiles survive.
    pub value: Option<f64>,
    /// High-minus-low signal return per rating quintile.
    pub long_short: Vec<Option<f64>>,
    /// Value-weighted cell returns, rows = rating quintiles (low to high
    /// score), columns = signal quintiles.
    pub cells: Vec<Vec<Option<f64>>>,
}

fn value_weighted(entries: &[(f64, f64)]) -> Option<f64> {
    let wsum: f64 = entries.iter().map(|(w, _)| w).sum();
    if wsum > 0.0 {
        Some(entries.iter().map(|(w, r)| w * r).sum::<f64>() / wsum)
    } else {
        None
    }
}

/// Independent 5x5 sort on rating score and `signal` for `month`.
pub fn double_sort(
    panel: &ReturnPanel,
    signal: &SignalSeries,
    month: Month,
    bins: usize,
) -> Result<DoubleSortOutcome> {
    let obs = panel.month_slice(month);
    let mut rating_vals = Vec::new();
    let mut signal_vals = Vec::new();
    let mut rows = Vec::new();
    for o in obs {
        let (Some(score), Some(sig)) = (o.rating_score, signal.get(&o.bond_id, month)) else {
            continue;
        };
        if o.amount_outstanding <= 0.0 {
            continue;
        }
        rating_vals.push((o.bond_id.clone(), score));
        signal_vals.push((o.bond_id.clone(), sig));
        rows.push((o.bond_id.clone(), o.amount_outstanding, o.excess_return));
    }
    let rating_bins = quantile_bins(&rating_vals, bins)?;
    let signal_bins = quantile_bins(&signal_vals, bins)?;

    let mut cells: Vec<Vec<Vec<(f64, f64)>>> = vec![vec![Vec::new(); bins]; bins];
    for (id, amount, ret) in rows {
        let r = rating_bins[&id];
        let c = signal_bins[&id];
        cells[r][c].push((amount, ret));
    }
    let cell_returns: Vec<Vec<Option<f64>>> = cells
        .iter()
        .map(|row| row.iter().map(|c| value_weighted(c)).collect())
        .collect();
    let long_short: Vec<Option<f64>> = cell_returns
        .iter()
        .map(|row| match (row[bins - 1], row[0]) {
            (Some(hi), Some(lo)) => Some(hi - lo),
            _ => None,
        })
        .collect();
    let survivors: Vec<f64> = long_short.iter().flatten().copied().collect();
    let value = if survivors.len() >= 3 {
        Some(survivors.iter().sum::<f64>() / survivors.len() as f64)
    } else {
        None
    };
    Ok(DoubleSortOutcome {
        value,
        long_short,
        cells: cell_returns,
    })
}

/// Monthly series of a rating-by-signal long-short factor (DRF with
/// col = VaR5, LRF with col = ILLIQ).
pub fn double_sort_factor(panel: &ReturnPanel, signal: &SignalSeries, name: &str) -> FactorSeries {
    let mut series = FactorSeries::new(name);
    for &m in &panel.months {
        match double_sort(panel, signal, m, 5) {
            Ok(out) => match out.value {
                Some(v) => {
                    series.values.insert(m, v);
                }
                None => series
                    .gaps
                    .push((m, "fewer than 3 rating quintiles survived".into())),
            },
            Err(e) => series.gaps.push((m, e.to_string())),
        }
    }
    series
}

/// Rating-direction long-short inside one sort: value-weighted return of
/// the highest-score (lowest-rated) quintile minus the lowest-score
/// quintile, averaged across signal quintiles with the survivor rule.
fn rating_long_short(out: &DoubleSortOutcome, bins: usize) -> Option<f64> {
    let spreads: Vec<f64> = (0..bins)
        .filter_map(|c| match (out.cells[bins - 1][c], out.cells[0][c]) {
            (Some(hi), Some(lo)) => Some(hi - lo),
            _ => None,
        })
        .collect();
    if spreads.len() >= 3 {
        Some(spreads.iter().sum::<f64>() / spreads.len() as f64)
    } else {
        None
    }
}

/// Credit factor for one month: mean of the three rating-direction
/// long-shorts taken inside the VaR5, ILLIQ, and REV sorts.
pub fn crf(
    panel: &ReturnPanel,
    var5: &SignalSeries,
    illiq: &SignalSeries,
    rev: &SignalSeries,
    month: Month,
) -> Result<Option<f64>> {
    let mut components = Vec::with_capacity(3);
    for signal in [var5, illiq, rev] {
        let out = double_sort(panel, signal, month, 5)?;
        match rating_long_short(&out, 5) {
            Some(v) => components.push(v),
            None => return Ok(None),
        }
    }
    Ok(Some(components.iter().sum::<f64>() / 3.0))
}

pub fn compute_crf(
    panel: &ReturnPanel,
    var5: &SignalSeries,
    illiq: &SignalSeries,
    rev: &SignalSeries,
) -> FactorSeries {
    let mut series = FactorSeries::new("CRF");
    for &m in &panel.months {
        match crf(panel, var5, illiq, rev, m) {
            Ok(Some(v)) => {
                series.values.insert(m, v);
            }
            Ok(None) => series.gaps.push((m, "component sort unavailable".into())),
            Err(e) => series.gaps.push((m, e.to_string())),
        }
    }
    series
}

/// Projection of a nontraded factor onto traded basis returns.
#[derive(Debug, Clone)]
pub struct MimickingPortfolio {
    pub target: String,
    pub basis_names: Vec<String>,
    pub weights: DVector<f64>,
    pub intercept: f64,
    /// w' R_t, intercept excluded.
    pub fitted: Vec<f64>,
    pub r2: f64,
    pub f_stat: f64,
    /// Joint significance of the slopes.
    pub p_value: f64,
}

fn collinear_subset(basis: &DMatrix<f64>, names: &[String]) -> Vec<String> {
    let n = basis.ncols();
    let mut out = Vec::new();
    for j in 0..n {
        let others: Vec<usize> = (0..n).filter(|&i| i != j).collect();
        let x = DMatrix::from_fn(basis.nrows(), others.len(), |r, c| basis[(r, others[c])]);
        let y = basis.columns(j, 1).into_owned();
        if let Ok((_, _, resid)) = ols_multi(&y, &x) {
            let rss: f64 = resid.iter().map(|v| v * v).sum();
            let tot: f64 = y.iter().map(|v| v * v).sum();
            if rss < 1e-10 * tot.max(1e-300) {
                out.push(names[j].clone());
            }
        }
    }
    out
}

pub fn mimicking_portfolio(
    target: &str,
    g: &[f64],
    basis: &DMatrix<f64>,
    basis_names: &[String],
) -> Result<MimickingPortfolio> {
    let t = g.len();
    let n = basis.ncols();
    if basis.nrows() != t {
        return Err(Error::data("factor and basis series length mismatch"));
    }
    if t < n + 2 {
        return Err(Error::InsufficientData(format!(
            "mimicking projection needs T >= N + 2, got T={t}, N={n}"
        )));
    }
    let mut design = DMatrix::from_element(t, n + 1, 1.0);
    design.view_mut((0, 1), (t, n)).copy_from(basis);
    let xtx = design.transpose() * &design;
    let eig = xtx.symmetric_eigenvalues();
    let max_eig = eig.iter().cloned().fold(0.0f64, f64::max);
    let min_eig = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < 1e-10 * max_eig {
        return Err(Error::Singular(format!(
            "basis covariance is rank-deficient; collinear assets: [{}]",
            collinear_subset(basis, basis_names).join(", ")
        )));
    }
    let y = DMatrix::from_column_slice(t, 1, g);
    let (intercepts, slopes, _) = ols_multi(&y, basis)?;
    let weights = slopes.column(0).into_owned();
    let gv = DVector::from_column_slice(g);
    let (r2, f_stat, p_value) = slope_f_test(&gv, basis)?;
    let fitted: Vec<f64> = (0..t).map(|ti| basis.row(ti).transpose().dot(&weights)).collect();
    Ok(MimickingPortfolio {
        target: target.to_string(),
        basis_names: basis_names.to_vec(),
        weights,
        intercept: intercepts[0],
        fitted,
        r2,
        f_stat,
        p_value,
    })
}

/// Bootstrap standard errors for a mimicking portfolio's mean return and
/// its alpha against a market series.
#[derive(Debug, Clone)]
pub struct MimickingBootstrapSe {
    /// Resamples the estimated mimicking-return series only.
    pub ejn_mean: f64,
    /// Jointly resamples the raw data and re-estimates the weights.
    pub dmr_mean: f64,
    pub ejn_alpha: Option<f64>,
    pub dmr_alpha: Option<f64>,
}

fn mean(series: &[f64]) -> f64 {
    series.iter().sum::<f64>() / series.len() as f64
}

fn sd(series: &[f64]) -> f64 {
    let m = mean(series);
    (series.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (series.len() as f64 - 1.0)).sqrt()
}

fn alpha_on_market(series: &[f64], market: &[f64]) -> f64 {
    let t = series.len();
    let y = DMatrix::from_column_slice(t, 1, series);
    let x = DMatrix::from_column_slice(t, 1, market);
    let (intercepts, _, _) = ols_multi(&y, &x).expect("market regression");
    intercepts[0]
}

pub fn mimicking_bootstrap_se(
    g: &[f64],
    basis: &DMatrix<f64>,
    basis_names: &[String],
    market: Option<&[f64]>,
    block_length: usize,
    replications: usize,
    seed: u64,
) -> Result<MimickingBootstrapSe> {
    bootstrap::validate(replications, block_length)?;
    let t = g.len();
    let port = mimicking_portfolio("target", g, basis, basis_names)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ejn_means = Vec::with_capacity(replications);
    let mut ejn_alphas = Vec::with_capacity(replications);
    for _ in 0..replications {
        let idx = bootstrap::circular_block_indices(t, block_length, &mut rng);
        let fitted: Vec<f64> = idx.iter().map(|&i| port.fitted[i]).collect();
        ejn_means.push(mean(&fitted));
        if let Some(mkt) = market {
            let mkt_star: Vec<f64> = idx.iter().map(|&i| mkt[i]).collect();
            ejn_alphas.push(alpha_on_market(&fitted, &mkt_star));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
    let mut dmr_means = Vec::with_capacity(replications);
    let mut dmr_alphas = Vec::with_capacity(replications);
    for _ in 0..replications {
        let idx = bootstrap::circular_block_indices(t, block_length, &mut rng);
        let g_star: Vec<f64> = idx.iter().map(|&i| g[i]).collect();
        let basis_star = DMatrix::from_fn(t, basis.ncols(), |r, c| basis[(idx[r], c)]);
        let Ok(port_star) = mimicking_portfolio("target", &g_star, &basis_star, basis_names) else {
            continue;
        };
        dmr_means.push(mean(&port_star.fitted));
        if let Some(mkt) = market {
            let mkt_star: Vec<f64> = idx.iter().map(|&i| mkt[i]).collect();
            dmr_alphas.push(alpha_on_market(&port_star.fitted, &mkt_star));
        }
    }
    if dmr_means.len() < replications / 2 {
        return Err(Error::Numerical(
            "too many degenerate bootstrap replications".into(),
        ));
    }
    Ok(MimickingBootstrapSe {
        ejn_mean: sd(&ejn_means),
        dmr_mean: sd(&dmr_means),
        ejn_alpha: market.map(|_| sd(&ejn_alphas)),
        dmr_alpha: market.map(|_| sd(&dmr_alphas)),
    })
}

/// Aggregate liquidity recipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiquidityKind {
    /// Signed-volume return-reversal coefficient, averaged per month and
    /// scaled by aggregate volume.
    Ps,
    /// Average daily |return| over dollar volume.
    Am,
}

/// Monthly aggregate liquidity levels and their AR(2) innovations.
#[derive(Debug, Clone)]
pub struct AggregateLiquidity {
    pub kind: LiquidityKind,
    pub levels: BTreeMap<Month, f64>,
    /// AR(2) residuals, starting at the third level month.
    pub innovations: BTreeMap<Month, f64>,
    pub gaps: Vec<(Month, String)>,
}

fn month_of(date: chrono::NaiveDate) -> Month {
    Month::new(date.year(), date.month())
}

/// Bond-market aggregate liquidity from daily prices and volumes.
pub fn aggregate_liquidity(
    daily: &HashMap<String, BTreeMap<chrono::NaiveDate, DailyPrice>>,
    kind: LiquidityKind,
    min_bonds: usize,
) -> Result<AggregateLiquidity> {
    // Per-bond per-month daily return/volume triples.
    let mut per_month: BTreeMap<Month, Vec<Vec<(f64, f64)>>> = BTreeMap::new();
    let mut bond_ids: Vec<&String> = daily.keys().collect();
    bond_ids.sort();
    for id in bond_ids {
        let prices = &daily[id.as_str()];
        let days: Vec<&DailyPrice> = prices.values().collect();
        let mut by_month: BTreeMap<Month, Vec<(f64, f64)>> = BTreeMap::new();
        for pair in days.windows(2) {
            let m = month_of(pair[1].date);
            if month_of(pair[0].date) != m {
                continue;
            }
            let r = (pair[1].clean_price / pair[0].clean_price).ln();
            by_month.entry(m).or_default().push((r, pair[1].total_volume));
        }
        for (m, v) in by_month {
            per_month.entry(m).or_default().push(v);
        }
    }

    let mut levels = BTreeMap::new();
    let mut gaps = Vec::new();
    for (m, bonds) in &per_month {
        let mut per_bond = Vec::new();
        let mut total_volume = 0.0;
        for series in bonds {
            match kind {
                LiquidityKind::Am => {
                    if series.is_empty() {
                        continue;
                    }
                    let v: f64 = series
                        .iter()
                        .filter(|(_, vol)| *vol > 0.0)
                        .map(|(r, vol)| r.abs() / vol)
                        .sum::<f64>()
                        / series.len() as f64;
                    per_bond.push(v);
                }
                LiquidityKind::Ps => {
                    // r_{d+1} on r_d and sign(r_d) * volume_d.
                    if series.len() < 11 {
                        continue;
                    }
                    let rows = series.len() - 1;
                    let mut x = DMatrix::zeros(rows, 2);
                    let mut y = DMatrix::zeros(rows, 1);
                    for i in 0..rows {
                        let (r0, v0) = series[i];
                        x[(i, 0)] = r0;
                        x[(i, 1)] = r0.signum() * v0;
                        y[(i, 0)] = series[i + 1].0;
                    }
                    if let Ok((_, slopes, _)) = ols_multi(&y, &x) {
                        per_bond.push(slopes[(1, 0)]);
                    }
                }
            }
            total_volume += series.iter().map(|(_, vol)| vol).sum::<f64>();
        }
        if per_bond.len() < min_bonds {
            gaps.push((*m, format!("only {} eligible bonds", per_bond.len())));
            continue;
        }
        let avg = per_bond.iter().sum::<f64>() / per_bond.len() as f64;
        let level = match kind {
            LiquidityKind::Am => avg,
            LiquidityKind::Ps => avg * total_volume,
        };
        levels.insert(*m, level);
    }

    // AR(2) innovations on the contiguous level series.
    let ordered: Vec<(Month, f64)> = levels.iter().map(|(m, v)| (*m, *v)).collect();
    if ordered.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "only {} liquidity months; need at least 8 for AR(2) innovations",
            ordered.len()
        )));
    }
    let rows = ordered.len() - 2;
    let mut x = DMatrix::zeros(rows, 2);
    let mut y = DMatrix::zeros(rows, 1);
    for i in 0..rows {
        x[(i, 0)] = ordered[i + 1].1;
        x[(i, 1)] = ordered[i].1;
        y[(i, 0)] = ordered[i + 2].1;
    }
    let innovations = match ols_multi(&y, &x) {
        Ok((_, _, resid)) => (0..rows)
            .map(|i| (ordered[i + 2].0, resid[(i, 0)]))
            .collect(),
        // A constant level series has no AR structure; innovations zero.
        Err(_) => (0..rows).map(|i| (ordered[i + 2].0, 0.0)).collect(),
    };
    Ok(AggregateLiquidity {
        kind,
        levels,
        innovations,
        gaps,
    })
}

/// Lag of `b` relative to `a` (in months) maximizing correlation, over
/// `-max_lag ..= max_lag`; positive means `b` lags `a`.
pub fn align_lag(a: &[f64], b: &[f64], max_lag: usize) -> Result<(i64, f64)> {
    let t = a.len().min(b.len());
    if t < max_lag + 5 {
        return Err(Error::InsufficientData("series too short for lag scan".into()));
    }
    let corr = |x: &[f64], y: &[f64]| {
        let (mx, my) = (mean(x), mean(y));
        let mut num = 0.0;
        let mut dx = 0.0;
        let mut dy = 0.0;
        for i in 0..x.len() {
            num += (x[i] - mx) * (y[i] - my);
            dx += (x[i] - mx).powi(2);
            dy += (y[i] - my).powi(2);
        }
        if dx > 0.0 && dy > 0.0 {
            num / (dx * dy).sqrt()
        } else {
            0.0
        }
    };
    let mut best = (0i64, f64::NEG_INFINITY);
    for lag in -(max_lag as i64)..=(max_lag as i64) {
        let (xa, xb) = if lag >= 0 {
            (&a[..t - lag as usize], &b[lag as usize..t])
        } else {
            (&a[(-lag) as usize..t], &b[..t - (-lag) as usize])
        };
        let c = corr(xa, xb);
        if c > best.1 {
            best = (lag, c);
        }
    }
    Ok(best)
}
