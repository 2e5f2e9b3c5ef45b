//! Cross-sectional test assets: signal-sorted portfolios, industry
//! portfolios, the combined 32-asset set, and post-ranking beta
//! assignments for bond-level regressions.

use crate::calendar::Month;
use crate::error::Error;
use crate::factors::{quantile_bins, FactorSeries};
use crate::returns::ReturnPanel;
use crate::signals::SignalSeries;
use crate::stats::sharpe::ols_multi;
use crate::Result;
use nalgebra::DMatrix;
use std::collections::{BTreeMap, HashMap};

/// Portfolio weighting scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PortfolioWeighting {
    Value,
    Equal,
}

/// A monthly panel of portfolio excess returns with membership records.
#[derive(Debug, Clone)]
pub struct PortfolioSet {
    pub name: String,
    pub months: Vec<Month>,
    pub column_names: Vec<String>,
    /// T x N excess returns; NaN marks an empty portfolio-month.
    pub returns: DMatrix<f64>,
    /// Per month: bond id -> column index.
    pub membership: Vec<BTreeMap<String, usize>>,
    /// Empty or degenerate cells, with the reason.
    pub gaps: Vec<(Month, String)>,
}

impl PortfolioSet {
    /// Column means ignoring missing months.
    pub fn column_means(&self) -> Vec<f64> {
        (0..self.returns.ncols())
            .map(|j| {
                let vals: Vec<f64> = self
                    .returns
                    .column(j)
                    .iter()
                    .cloned()
                    .filter(|v| v.is_finite())
                    .collect();
                vals.iter().sum::<f64>() / vals.len().max(1) as f64
            })
            .collect()
    }
}

/// Signal series built from a per-observation field.
pub fn rating_signal(panel: &ReturnPanel) -> SignalSeries {
    let mut s = SignalSeries::new("rating");
    for ((bond, month), o) in &panel.observations {
        if let Some(score) = o.rating_score {
            s.insert(bond, *month, score);
        }
    }
    s
}

pub fn maturity_signal(panel: &ReturnPanel) -> SignalSeries {
    let mut s = SignalSeries::new("maturity");
    for ((bond, month), o) in &panel.observations {
        s.insert(bond, *month, o.time_to_maturity);
    }
    s
}

/// Quantile-sorted portfolios on a per-bond monthly signal.
pub fn sorted_portfolios(
    panel: &ReturnPanel,
    signal: &SignalSeries,
    n_bins: usize,
    weighting: PortfolioWeighting,
    name: &str,
) -> Result<PortfolioSet> {
    let months = panel.months.clone();
    let mut returns = DMatrix::from_element(months.len(), n_bins, f64::NAN);
    let mut membership = Vec::with_capacity(months.len());
    let mut gaps = Vec::new();
    for (ti, &m) in months.iter().enumerate() {
        let obs = panel.month_slice(m);
        let mut sigvals = Vec::new();
        let mut rows = Vec::new();
        for o in &obs {
            let Some(v) = signal.get(&o.bond_id, m) else {
                continue;
            };
            sigvals.push((o.bond_id.clone(), v));
            rows.push((o.bond_id.clone(), o.amount_outstanding, o.excess_return));
        }
        if sigvals.is_empty() {
            gaps.push((m, "no bonds with the sort signal".into()));
            membership.push(BTreeMap::new());
            continue;
        }
        let bins = quantile_bins(&sigvals, n_bins).map_err(|e| {
            Error::data(format!("sort {name} degenerate in {m}: {e}"))
        })?;
        let mut cells: Vec<Vec<(f64, f64)>> = vec![Vec::new(); n_bins];
        let mut members = BTreeMap::new();
        for (id, amount, ret) in rows {
            let b = bins[&id];
            let w = match weighting {
                PortfolioWeighting::Value => amount,
                PortfolioWeighting::Equal => 1.0,
            };
            cells[b].push((w, ret));
            members.insert(id, b);
        }
        for (b, cell) in cells.iter().enumerate() {
            let wsum: f64 = cell.iter().map(|(w, _)| w).sum();
            if wsum > 0.0 {
                returns[(ti, b)] = cell.iter().map(|(w, r)| w * r).sum::<f64>() / wsum;
            } else {
                gaps.push((m, format!("bin {b} empty")));
            }
        }
        membership.push(members);
    }
    let column_names = (0..n_bins).map(|b| format!("{name}{}", b + 1)).collect();
    Ok(PortfolioSet {
        name: name.to_string(),
        months,
        column_names,
        returns,
        membership,
        gaps,
    })
}

/// The twelve industry groups, in fixed column order.
pub const INDUSTRY_GROUPS: [&str; 12] = [
    "NoDur", "Durbl", "Manuf", "Enrgy", "Chems", "BusEq", "Telcm", "Utils", "Shops", "Hlth",
    "Money", "Other",
];

/// Value-weighted portfolios per industry group. `code_to_group` maps an
/// issuer industry code to one of the twelve group names; unmapped codes
/// fall into "Other" and are logged.
pub fn industry_portfolios(
    panel: &ReturnPanel,
    bond_industry: &HashMap<String, String>,
    code_to_group: &HashMap<String, String>,
) -> Result<(PortfolioSet, Vec<String>)> {
    let group_index: HashMap<&str, usize> = INDUSTRY_GROUPS
        .iter()
        .enumerate()
        .map(|(i, g)| (*g, i))
        .collect();
    let months = panel.months.clone();
    let mut returns = DMatrix::from_element(months.len(), 12, f64::NAN);
    let mut membership = Vec::with_capacity(months.len());
    let mut gaps = Vec::new();
    let mut unmapped = Vec::new();
    for (ti, &m) in months.iter().enumerate() {
        let mut cells: Vec<Vec<(f64, f64)>> = vec![Vec::new(); 12];
        let mut members = BTreeMap::new();
        for o in panel.month_slice(m) {
            let group = bond_industry
                .get(&o.bond_id)
                .and_then(|code| code_to_group.get(code))
                .map(|g| g.as_str())
                .unwrap_or_else(|| {
                    unmapped.push(o.bond_id.clone());
                    "Other"
                });
            let col = *group_index.get(group).ok_or_else(|| {
                Error::config(format!("mapping file names unknown group `{group}`"))
            })?;
            cells[col].push((o.amount_outstanding, o.excess_return));
            members.insert(o.bond_id.clone(), col);
        }
        for (col, cell) in cells.iter().enumerate() {
            let wsum: f64 = cell.iter().map(|(w, _)| w).sum();
            if wsum > 0.0 {
                returns[(ti, col)] = cell.iter().map(|(w, r)| w * r).sum::<f64>() / wsum;
            } else {
                gaps.push((m, format!("industry {} empty", INDUSTRY_GROUPS[col])));
            }
        }
        membership.push(members);
    }
    unmapped.sort();
    unmapped.dedup();
    Ok((
        PortfolioSet {
            name: "industry".into(),
            months,
            column_names: INDUSTRY_GROUPS.iter().map(|s| s.to_string()).collect(),
            returns,
            membership,
            gaps,
        },
        unmapped,
    ))
}

/// Horizontal concatenation of the four component sets into the 32-asset
/// cross-section: 5 rating + 5 maturity + 10 credit-spread + 12 industry.
pub fn combo32(
    rating: &PortfolioSet,
    maturity: &PortfolioSet,
    spread: &PortfolioSet,
    industry: &PortfolioSet,
) -> Result<PortfolioSet> {
    let expect = [
        (rating, 5, "rating"),
        (maturity, 5, "maturity"),
        (spread, 10, "credit-spread"),
        (industry, 12, "industry"),
    ];
    for (set, n, label) in &expect {
        if set.returns.ncols() != *n {
            return Err(Error::data(format!(
                "{label} component has {} columns, expected {n}",
                set.returns.ncols()
            )));
        }
        if set.months != rating.months {
            return Err(Error::data(format!(
                "{label} component month calendar differs from the rating sort"
            )));
        }
    }
    let t = rating.months.len();
    let mut returns = DMatrix::from_element(t, 32, f64::NAN);
    let mut column_names = Vec::with_capacity(32);
    let mut col = 0;
    for (set, _, _) in &expect {
        for j in 0..set.returns.ncols() {
            for ti in 0..t {
                returns[(ti, col)] = set.returns[(ti, j)];
            }
            column_names.push(format!("{}:{}", set.name, set.column_names[j]));
            col += 1;
        }
    }
    let mut gaps = Vec::new();
    for (set, _, _) in &expect {
        gaps.extend(set.gaps.iter().cloned());
    }
    Ok(PortfolioSet {
        name: "combo32".into(),
        months: rating.months.clone(),
        column_names,
        returns,
        membership: vec![BTreeMap::new(); t],
        gaps,
    })
}

/// Post-ranking beta assignment for one target factor.
#[derive(Debug, Clone)]
pub struct PostRankingAssignment {
    pub target: String,
    /// Quintile per bond-month (months with enough history only).
    pub quintile: BTreeMap<(String, Month), usize>,
    /// Equally weighted quintile portfolio return series.
    pub portfolio_returns: DMatrix<f64>,
    pub portfolio_months: Vec<Month>,
    /// Full-sample post-ranking beta per quintile (target coefficient).
    pub post_betas: Vec<f64>,
    /// Full-sample covariance of each quintile portfolio with the target.
    pub post_covs: Vec<f64>,
    /// Assigned per-bond values: beta and covariance of the member quintile.
    pub assigned_beta: BTreeMap<(String, Month), f64>,
    pub assigned_cov: BTreeMap<(String, Month), f64>,
}

/// Rolling pre-ranking beta of `bond` on `target` (optionally jointly with
/// a companion factor) over the window ending at `end`.
fn pre_ranking_beta(
    panel: &ReturnPanel,
    bond: &str,
    end: Month,
    target: &FactorSeries,
    companion: Option<&FactorSeries>,
    window: usize,
    min_obs: usize,
) -> Option<f64> {
    let start = end.offset(-(window as i64 - 1));
    let mut y = Vec::new();
    let mut x = Vec::new();
    for m in start.range_inclusive(end) {
        let (Some(o), Some(f)) = (panel.get(bond, m), target.get(m)) else {
            continue;
        };
        if let Some(c) = companion {
            let Some(cf) = c.get(m) else { continue };
            y.push(o.excess_return);
            x.push((f, Some(cf)));
        } else {
            y.push(o.excess_return);
            x.push((f, None));
        }
    }
    if y.len() < min_obs {
        return None;
    }
    let t = y.len();
    let k = if companion.is_some() { 2 } else { 1 };
    let mut design = DMatrix::zeros(t, k);
    for i in 0..t {
        design[(i, 0)] = x[i].0;
        if let Some(cf) = x[i].1 {
            design[(i, 1)] = cf;
        }
    }
    let ym = DMatrix::from_column_slice(t, 1, &y);
    let (_, slopes, _) = ols_multi(&ym, &design).ok()?;
    Some(slopes[(0, 0)])
}

/// Build the five post-ranking quintiles for `target`. Membership in month
/// `t` uses pre-ranking betas from the window ending at `t-1`; portfolio
/// returns are equally weighted; post-ranking betas come from a
/// full-sample regression of each quintile's returns on the factor(s).
pub fn post_ranking(
    panel: &ReturnPanel,
    target: &FactorSeries,
    companion: Option<&FactorSeries>,
    window: usize,
    min_obs: usize,
) -> Result<PostRankingAssignment> {
    let mut quintile = BTreeMap::new();
    let mut portfolio_months = Vec::new();
    let mut port_rows: Vec<[Vec<f64>; 5]> = Vec::new();
    for &m in &panel.months {
        let formation = m.prev();
        let mut pre = Vec::new();
        for o in panel.month_slice(m) {
            if let Some(b) = pre_ranking_beta(
                panel,
                &o.bond_id,
                formation,
                target,
                companion,
                window,
                min_obs,
            ) {
                pre.push((o.bond_id.clone(), b));
            }
        }
        if pre.len() < 25 {
            continue;
        }
        let bins = match quantile_bins(&pre, 5) {
            Ok(b) => b,
            Err(_) => continue,
        };
        let mut cells: [Vec<f64>; 5] = Default::default();
        for (id, _) in &pre {
            let q = bins[id];
            quintile.insert((id.clone(), m), q);
            if let Some(o) = panel.get(id, m) {
                cells[q].push(o.excess_return);
            }
        }
        if cells.iter().any(|c| c.is_empty()) {
            continue;
        }
        portfolio_months.push(m);
        port_rows.push(cells);
    }
    if portfolio_months.len() < min_obs {
        return Err(Error::InsufficientData(format!(
            "only {} post-ranking months",
            portfolio_months.len()
        )));
    }
    let t = portfolio_months.len();
    let mut portfolio_returns = DMatrix::zeros(t, 5);
    for (ti, cells) in port_rows.iter().enumerate() {
        for q in 0..5 {
            portfolio_returns[(ti, q)] =
                cells[q].iter().sum::<f64>() / cells[q].len() as f64;
        }
    }

    // Full-sample post-ranking betas and covariances.
    let k = if companion.is_some() { 2 } else { 1 };
    let mut design = DMatrix::zeros(t, k);
    let mut target_series = Vec::with_capacity(t);
    for (ti, &m) in portfolio_months.iter().enumerate() {
        let f = target
            .get(m)
            .ok_or_else(|| Error::data(format!("target factor missing in {m}")))?;
        design[(ti, 0)] = f;
        target_series.push(f);
        if let Some(c) = companion {
            design[(ti, 1)] = c
                .get(m)
                .ok_or_else(|| Error::data(format!("companion factor missing in {m}")))?;
        }
    }
    let (_, slopes, _) = ols_multi(&portfolio_returns.clone(), &design)?;
    let post_betas: Vec<f64> = (0..5).map(|q| slopes[(0, q)]).collect();
    let fbar = target_series.iter().sum::<f64>() / t as f64;
    let post_covs: Vec<f64> = (0..5)
        .map(|q| {
            let col = portfolio_returns.column(q);
            let rbar = col.mean();
            (0..t)
                .map(|ti| (col[ti] - rbar) * (target_series[ti] - fbar))
                .sum::<f64>()
                / (t as f64 - 1.0)
        })
        .collect();

    let mut assigned_beta = BTreeMap::new();
    let mut assigned_cov = BTreeMap::new();
    for ((bond, m), q) in &quintile {
        assigned_beta.insert((bond.clone(), *m), post_betas[*q]);
        assigned_cov.insert((bond.clone(), *m), post_covs[*q]);
    }
    Ok(PostRankingAssignment {
        target: target.name.clone(),
        quintile,
        portfolio_returns,
        portfolio_months,
        post_betas,
        post_covs,
        assigned_beta,
        assigned_cov,
    })
}
