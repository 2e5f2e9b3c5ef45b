//! Government zero curve, bond yield solving, and credit spreads.
//!
//! The credit spread is the bond's yield to maturity minus the
//! maturity-matched government zero yield, both annually compounded. The
//! bond yield is solved from the clean price by bisection to 1e-10.

use crate::daycount::AccrualTerms;
use crate::error::Error;
use crate::Result;
use chrono::NaiveDate;

const YEAR_DAYS: f64 = 365.25;

/// Piecewise-linear zero curve: (maturity in years, yield in decimal).
#[derive(Debug, Clone)]
pub struct ZeroCurve {
    points: Vec<(f64, f64)>,
}

impl ZeroCurve {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::config("zero curve needs at least one point"));
        }
        points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::config("duplicate maturities in zero curve"));
        }
        Ok(ZeroCurve { points })
    }

    /// Linearly interpolated yield at `maturity` years, flat extrapolation.
    pub fn yield_at(&self, maturity: f64) -> f64 {
        let pts = &self.points;
        if maturity <= pts[0].0 {
            return pts[0].1;
        }
        if maturity >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let i = pts.partition_point(|p| p.0 < maturity);
        let (t0, y0) = pts[i - 1];
        let (t1, y1) = pts[i];
        y0 + (y1 - y0) * (maturity - t0) / (t1 - t0)
    }

    /// Bond yield minus maturity-matched government yield at `asof`.
    pub fn credit_spread(&self, clean_price: f64, terms: &AccrualTerms, asof: NaiveDate) -> Result<f64> {
        let ttm = (terms.maturity_date - asof).num_days() as f64 / YEAR_DAYS;
        if ttm <= 0.0 {
            return Err(Error::data("bond already matured at spread date"));
        }
        let y = bond_yield(clean_price, terms, asof)?;
        Ok(y - self.yield_at(ttm))
    }
}

/// Dirty price of the bond's remaining cash flows at annually compounded
/// yield `y`, per 100 face.
fn dirty_price_at_yield(y: f64, terms: &AccrualTerms, asof: NaiveDate) -> f64 {
    let mut pv = 0.0;
    for d in terms.coupon_dates_between(asof, terms.maturity_date) {
        let t = (d - asof).num_days() as f64 / YEAR_DAYS;
        pv += terms.coupon_per_period() / (1.0 + y).powf(t);
    }
    let t = (terms.maturity_date - asof).num_days() as f64 / YEAR_DAYS;
    pv + 100.0 / (1.0 + y).powf(t)
}

/// Solve the annually compounded yield matching `clean_price` by bisection.
pub fn bond_yield(clean_price: f64, terms: &AccrualTerms, asof: NaiveDate) -> Result<f64> {
    let ai = terms.accrued_interest(asof)?;
    let target = clean_price + ai;
    if target <= 0.0 {
        return Err(Error::Numerical("nonpositive dirty price".into()));
    }
    let mut lo = -0.95;
    let mut hi = 10.0;
    let f = |y: f64| dirty_price_at_yield(y, terms, asof) - target;
    if f(lo) < 0.0 || f(hi) > 0.0 {
        return Err(Error::Numerical(format!(
            "yield outside bisection bracket for price {clean_price}"
        )));
    }
    // Price is monotone decreasing in yield; bisect to 1e-10.
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
