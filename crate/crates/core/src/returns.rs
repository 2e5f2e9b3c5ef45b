//! Daily price aggregation and the monthly excess-return panel.
//!
//! Daily clean prices are volume-weighted averages of eligible intraday
//! trades. A monthly return for month `t` needs two boundary prices:
//!
//! * the end price: the last available price within the final five business
//!   days of month `t`;
//! * the start price: the end price of month `t-1` when it exists, else the
//!   first available price within the first five business days of month `t`.
//!
//! The return itself is
//!
//! ```text
//! R_t = (P_t + AI_t + C_t) / (P_{t-1} + AI_{t-1}) - 1
//! ```
//!
//! with accrued interest `AI` evaluated at the source days and `C_t` the
//! coupon paid strictly inside the `(source_{t-1}, source_t]` interval,
//! added without reinvestment. Months with remaining maturity under one
//! year are dropped.

use crate::calendar::{BusinessCalendar, Month};
use crate::curve::ZeroCurve;
use crate::error::Error;
use crate::ingest::{TradeRecord, ValidatedBond};
use crate::Result;
use chrono::NaiveDate;
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Volume-weighted daily clean price for one bond-day.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyPrice {
    pub bond_id: String,
    pub date: NaiveDate,
    /// Per 100 face.
    pub clean_price: f64,
    pub total_volume: f64,
}

/// Which boundary rule produced a month's start price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WindowRule {
    /// Last available business day in the final five of the prior month.
    EndOfPriorMonth,
    /// First available business day in the first five of the month itself.
    StartOfMonth,
}

/// One bond-month row of the panel.
#[derive(Debug, Clone)]
pub struct BondMonthObservation {
    pub bond_id: String,
    pub month: Month,
    /// Month-end price and its source day.
    pub price: f64,
    pub price_day: NaiveDate,
    pub accrued_interest: f64,
    pub coupon_paid: f64,
    /// Simple return per Eq.-style arithmetic, decimal units.
    pub ret: f64,
    /// Return in excess of the risk-free rate, decimal units.
    pub excess_return: f64,
    pub start_rule: WindowRule,
    /// 1 = AAA ... 22 = D; absent when no agency rating is on file.
    pub rating_score: Option<f64>,
    /// Years to maturity at the month end.
    pub time_to_maturity: f64,
    pub amount_outstanding: f64,
    /// Bond yield minus maturity-matched government yield, decimal per annum.
    pub credit_spread: Option<f64>,
}

/// Aligned monthly panel of bond observations.
#[derive(Debug, Clone, Default)]
pub struct ReturnPanel {
    /// Strictly increasing month calendar.
    pub months: Vec<Month>,
    pub observations: BTreeMap<(String, Month), BondMonthObservation>,
    /// Risk-free series, decimal units.
    pub risk_free: BTreeMap<Month, f64>,
}

impl ReturnPanel {
    pub fn bonds(&self) -> BTreeSet<&str> {
        self.observations.keys().map(|(b, _)| b.as_str()).collect()
    }

    pub fn get(&self, bond: &str, month: Month) -> Option<&BondMonthObservation> {
        self.observations.get(&(bond.to_string(), month))
    }

    /// All observations for one month.
    pub fn month_slice(&self, month: Month) -> Vec<&BondMonthObservation> {
        self.observations
            .iter()
            .filter(|((_, m), _)| *m == month)
            .map(|(_, o)| o)
            .collect()
    }

    /// Excess-return history of one bond up to and including `month`,
    /// most recent last, spanning at most `window` months.
    pub fn trailing_excess_returns(&self, bond: &str, month: Month, window: usize) -> Vec<f64> {
        let start = month.offset(-(window as i64 - 1));
        start
            .range_inclusive(month)
            .filter_map(|m| self.get(bond, m).map(|o| o.excess_return))
            .collect()
    }
}

/// Volume-weighted average price over one bond-day's eligible trades.
/// Returns `None` when total volume is zero.
pub fn daily_price(trades: &[&TradeRecord]) -> Option<DailyPrice> {
    let first = trades.first()?;
    let total_volume: f64 = trades.iter().map(|t| t.volume).sum();
    if total_volume <= 0.0 {
        return None;
    }
    let vwap = trades.iter().map(|t| t.price * t.volume).sum::<f64>() / total_volume;
    Some(DailyPrice {
        bond_id: first.bond_id.clone(),
        date: first.timestamp.date(),
        clean_price: vwap,
        total_volume,
    })
}

/// Group clean trades into per-bond daily price series.
pub fn daily_prices(trades: &[TradeRecord]) -> HashMap<String, BTreeMap<NaiveDate, DailyPrice>> {
    let mut by_day: HashMap<(String, NaiveDate), Vec<&TradeRecord>> = HashMap::new();
    for t in trades {
        by_day
            .entry((t.bond_id.clone(), t.timestamp.date()))
            .or_default()
            .push(t);
    }
    let mut out: HashMap<String, BTreeMap<NaiveDate, DailyPrice>> = HashMap::new();
    for ((bond, date), day_trades) in by_day {
        if let Some(dp) = daily_price(&day_trades) {
            out.entry(bond).or_default().insert(date, dp);
        }
    }
    out
}

/// Last available price within the final five business days of `month`.
pub fn month_end_price(
    prices: &BTreeMap<NaiveDate, DailyPrice>,
    month: Month,
    cal: &BusinessCalendar,
) -> Option<(f64, NaiveDate)> {
    let window = cal.last_n_business_days(month, 5);
    window
        .iter()
        .rev()
        .find_map(|d| prices.get(d).map(|p| (p.clean_price, *d)))
}

/// Start-of-interval boundary price for returns realized in `month`:
/// prefer the prior month's end price, else the first price within the
/// first five business days of `month`.
pub fn month_boundary_price(
    prices: &BTreeMap<NaiveDate, DailyPrice>,
    month: Month,
    cal: &BusinessCalendar,
) -> Option<(f64, NaiveDate, WindowRule)> {
    if let Some((p, d)) = month_end_price(prices, month.prev(), cal) {
        return Some((p, d, WindowRule::EndOfPriorMonth));
    }
    let window = cal.first_n_business_days(month, 5);
    window
        .iter()
        .find_map(|d| prices.get(d).map(|p| (p.clean_price, *d, WindowRule::StartOfMonth)))
}

/// Eq.-(1)-style monthly return from resolved boundary quantities.
pub fn monthly_return(
    price_t: f64,
    ai_t: f64,
    coupon_t: f64,
    price_prev: f64,
    ai_prev: f64,
) -> Result<f64> {
    let denom = price_prev + ai_prev;
    if denom <= 0.0 {
        return Err(Error::Numerical(format!(
            "nonpositive dirty price denominator {denom}"
        )));
    }
    Ok((price_t + ai_t + coupon_t) / denom - 1.0)
}

/// Agency rating history: scores per bond-month; multiple agencies allowed.
#[derive(Debug, Clone, Default)]
pub struct RatingHistory {
    scores: HashMap<(String, Month), Vec<f64>>,
}

impl RatingHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, bond: &str, month: Month, score: f64) {
        self.scores
            .entry((bond.to_string(), month))
            .or_default()
            .push(score);
    }

    /// Combined score: arithmetic mean across agencies, rounded half-up,
    /// clamped to the 1..=22 scale.
    pub fn score(&self, bond: &str, month: Month) -> Option<f64> {
        let v = self.scores.get(&(bond.to_string(), month))?;
        if v.is_empty() {
            return None;
        }
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        Some((mean + 0.5).floor().clamp(1.0, 22.0))
    }
}

/// Inputs for panel construction beyond the price series.
pub struct PanelInputs<'a> {
    pub universe: &'a [ValidatedBond],
    pub ratings: &'a RatingHistory,
    /// Risk-free series, decimal units.
    pub risk_free: &'a BTreeMap<Month, f64>,
    /// Optional government zero curve for credit spreads.
    pub curve: Option<&'a ZeroCurve>,
    pub calendar: &'a BusinessCalendar,
}

/// Assemble the monthly panel over `[start, end]`.
///
/// Applies the one-year remaining-maturity screen month by month and errors
/// when a month with computable returns has no risk-free observation.
pub fn build_panel(
    prices: &HashMap<String, BTreeMap<NaiveDate, DailyPrice>>,
    inputs: &PanelInputs,
    start: Month,
    end: Month,
) -> Result<ReturnPanel> {
    let months: Vec<Month> = start.range_inclusive(end).collect();
    let mut panel = ReturnPanel {
        months: months.clone(),
        observations: BTreeMap::new(),
        risk_free: inputs.risk_free.clone(),
    };

    let mut ids: Vec<&ValidatedBond> = inputs.universe.iter().collect();
    ids.sort_by(|a, b| a.master.bond_id.cmp(&b.master.bond_id));

    for bond in ids {
        let id = &bond.master.bond_id;
        let Some(series) = prices.get(id) else {
            continue;
        };
        for &month in &months {
            let Some((p_end, d_end)) = month_end_price(series, month, inputs.calendar) else {
                continue;
            };
            let Some((p_start, d_start, rule)) = month_boundary_price(series, month, inputs.calendar)
            else {
                continue;
            };
            if d_start >= d_end {
                continue;
            }
            // Remaining-maturity screen at the month end, in years.
            let ttm = (bond.terms.maturity_date - month.last_day()).num_days() as f64 / 365.25;
            if ttm < 1.0 {
                continue;
            }
            let ai_end = bond.terms.accrued_interest(d_end)?;
            let ai_start = bond.terms.accrued_interest(d_start)?;
            let coupon: f64 = bond
                .terms
                .coupon_dates_between(d_start, d_end)
                .iter()
                .map(|_| bond.terms.coupon_per_period())
                .sum();
            let ret = monthly_return(p_end, ai_end, coupon, p_start, ai_start)?;
            let rf = *inputs.risk_free.get(&month).ok_or_else(|| {
                Error::data(format!("missing risk-free rate for month {month}"))
            })?;
            let credit_spread = inputs
                .curve
                .and_then(|c| c.credit_spread(p_end, &bond.terms, d_end).ok());
            panel.observations.insert(
                (id.clone(), month),
                BondMonthObservation {
                    bond_id: id.clone(),
                    month,
                    price: p_end,
                    price_day: d_end,
                    accrued_interest: ai_end,
                    coupon_paid: coupon,
                    ret,
                    excess_return: ret - rf,
                    start_rule: rule,
                    rating_score: inputs.ratings.score(id, month),
                    time_to_maturity: ttm,
                    amount_outstanding: bond.amount_outstanding,
                    credit_spread,
                },
            );
        }
    }
    Ok(panel)
}
