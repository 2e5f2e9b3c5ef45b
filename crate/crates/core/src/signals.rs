//! Bond-level sorting signals.
//!
//! * `VaR5`: negative of the second-lowest monthly return over the trailing
//!   36 months (minimum 24 observations).
//! * `ILLIQ`: negative first-order autocovariance of daily log price
//!   changes (in percent) within the month, computed over adjacent pairs
//!   whose legs are at most seven business days apart and requiring at
//!   least five pairs; winsorized cross-sectionally at 0.5% per tail.
//! * `REV`: prior-month excess return.
//! * Credit-spread signal: mean of the available spreads over months
//!   `t-12..t-1`, used with a one-month formation lag.

use crate::calendar::{BusinessCalendar, Month};
use crate::returns::{DailyPrice, ReturnPanel};
use chrono::NaiveDate;
use std::collections::{BTreeMap, HashMap};

/// A named bond-month signal surface.
#[derive(Debug, Clone)]
pub struct SignalSeries {
    pub name: String,
    pub values: BTreeMap<(String, Month), f64>,
}

impl SignalSeries {
    pub fn new(name: &str) -> Self {
        SignalSeries {
            name: name.to_string(),
            values: BTreeMap::new(),
        }
    }

    pub fn get(&self, bond: &str, month: Month) -> Option<f64> {
        self.values.get(&(bond.to_string(), month)).copied()
    }

    pub fn insert(&mut self, bond: &str, month: Month, value: f64) {
        self.values.insert((bond.to_string(), month), value);
    }
}

/// Downside risk: negative of the second-lowest trailing return.
/// `returns` is the trailing window (at most 36 observations).
pub fn var5(returns: &[f64], min_obs: usize) -> Option<f64> {
    if returns.len() < min_obs {
        return None;
    }
    let mut sorted = returns.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(-sorted[1])
}

/// How the pair covariance in ILLIQ is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum IlliqDivisor {
    /// Divide by the number of pairs.
    N,
    /// Divide by pairs minus one.
    NMinusOne,
}

/// ILLIQ computation knobs.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct IlliqSpec {
    /// Maximum business-day gap for a daily price change to count.
    pub max_gap_business_days: usize,
    pub min_pairs: usize,
    pub divisor: IlliqDivisor,
}

impl Default for IlliqSpec {
    fn default() -> Self {
        IlliqSpec {
            max_gap_business_days: 7,
            min_pairs: 5,
            divisor: IlliqDivisor::N,
        }
    }
}

/// Daily log price changes within a month, in percent, keeping only changes
/// whose legs are at most `max_gap` business days apart. Each entry records
/// the end date so adjacency can be checked downstream.
pub fn log_price_changes(
    prices: &BTreeMap<NaiveDate, DailyPrice>,
    month: Month,
    cal: &BusinessCalendar,
    max_gap: usize,
) -> Vec<(NaiveDate, NaiveDate, f64)> {
    let in_month: Vec<(&NaiveDate, &DailyPrice)> = prices
        .range(month.first_day()..=month.last_day())
        .collect();
    let mut out = Vec::new();
    for w in in_month.windows(2) {
        let (d0, p0) = w[0];
        let (d1, p1) = w[1];
        if cal.business_days_between(*d0, *d1) <= max_gap {
            out.push((*d0, *d1, 100.0 * (p1.clean_price.ln() - p0.clean_price.ln())));
        }
    }
    out
}

/// Adjacent pairs of price changes sharing their middle day.
pub fn adjacent_pairs(changes: &[(NaiveDate, NaiveDate, f64)]) -> Vec<(f64, f64)> {
    changes
        .windows(2)
        .filter(|w| w[0].1 == w[1].0)
        .map(|w| (w[0].2, w[1].2))
        .collect()
}

/// Streaming (single-pass) ILLIQ over adjacent pairs: the negative of the
/// pair cross-moment about the mean of all price changes in the month.
pub fn illiq_from_pairs(pairs: &[(f64, f64)], all_changes_mean: f64, spec: &IlliqSpec) -> Option<f64> {
    let n = pairs.len();
    if n < spec.min_pairs {
        return None;
    }
    let mut cross = 0.0;
    for &(x, y) in pairs {
        cross += (x - all_changes_mean) * (y - all_changes_mean);
    }
    let denom = match spec.divisor {
        IlliqDivisor::N => n as f64,
        IlliqDivisor::NMinusOne => (n - 1) as f64,
    };
    Some(-(cross / denom))
}

/// ILLIQ for one bond-month from its daily price series.
pub fn illiq(
    prices: &BTreeMap<NaiveDate, DailyPrice>,
    month: Month,
    cal: &BusinessCalendar,
    spec: &IlliqSpec,
) -> Option<f64> {
    let changes = log_price_changes(prices, month, cal, spec.max_gap_business_days);
    let pairs = adjacent_pairs(&changes);
    if changes.is_empty() {
        return None;
    }
    let mean = changes.iter().map(|c| c.2).sum::<f64>() / changes.len() as f64;
    illiq_from_pairs(&pairs, mean, spec)
}

/// Winsorize values in place at `tail` per tail (e.g. 0.005), clamping to
/// the empirical order statistics. Rank order of interior points survives.
pub fn winsorize(values: &mut [f64], tail: f64) {
    let n = values.len();
    if n < 3 || tail <= 0.0 {
        return;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo_idx = ((n as f64 * tail).floor() as usize).min(n - 1);
    let hi_idx = n - 1 - lo_idx;
    let (lo, hi) = (sorted[lo_idx], sorted[hi_idx]);
    for v in values.iter_mut() {
        *v = v.clamp(lo, hi);
    }
}

/// VaR5 surface over the panel: trailing `window` months, `min_obs` minimum.
pub fn compute_var5(panel: &ReturnPanel, window: usize, min_obs: usize) -> SignalSeries {
    let mut out = SignalSeries::new("VaR5");
    let bonds: Vec<String> = panel.bonds().iter().map(|s| s.to_string()).collect();
    for bond in &bonds {
        for &month in &panel.months {
            let hist = panel.trailing_excess_returns(bond, month, window);
            if let Some(v) = var5(&hist, min_obs) {
                out.insert(bond, month, v);
            }
        }
    }
    out
}

/// ILLIQ surface: per-bond monthly values, screened for the minimum pair
/// count first, then winsorized cross-sectionally at `tail` per tail.
pub fn compute_illiq(
    prices: &HashMap<String, BTreeMap<NaiveDate, DailyPrice>>,
    months: &[Month],
    cal: &BusinessCalendar,
    spec: &IlliqSpec,
    tail: f64,
) -> SignalSeries {
    let mut out = SignalSeries::new("ILLIQ");
    let mut bonds: Vec<&String> = prices.keys().collect();
    bonds.sort();
    for &month in months {
        let mut ids = Vec::new();
        let mut vals = Vec::new();
        for bond in &bonds {
            if let Some(v) = illiq(&prices[bond.as_str()], month, cal, spec) {
                ids.push(bond.as_str());
                vals.push(v);
            }
        }
        winsorize(&mut vals, tail);
        for (id, v) in ids.iter().zip(vals) {
            out.insert(id, month, v);
        }
    }
    out
}

/// Short-term reversal: the prior-month excess return.
pub fn compute_rev(panel: &ReturnPanel) -> SignalSeries {
    let mut out = SignalSeries::new("REV");
    for ((bond, month), obs) in &panel.observations {
        out.insert(bond, month.next(), obs.excess_return);
    }
    out
}

/// Credit-spread signal: mean of available spreads over `t-12..t-1`.
pub fn compute_credit_spread_signal(panel: &ReturnPanel) -> SignalSeries {
    let mut out = SignalSeries::new("CS12");
    let bonds: Vec<String> = panel.bonds().iter().map(|s| s.to_string()).collect();
    for bond in &bonds {
        for &month in &panel.months {
            let window: Vec<f64> = (1..=12)
                .filter_map(|lag| {
                    panel
                        .get(bond, month.offset(-lag))
                        .and_then(|o| o.credit_spread)
                })
                .collect();
            if !window.is_empty() {
                out.insert(bond, month, window.iter().sum::<f64>() / window.len() as f64);
            }
        }
    }
    out
}
