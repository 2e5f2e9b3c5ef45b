//! Day-count conventions, coupon schedules, and accrued interest.
//!
//! Two conventions are supported: 30/360 (US) and ACT/ACT. Accrued interest
//! is quoted per 100 of face value:
//!
//! ```text
//! AI = coupon_rate / frequency * elapsed_fraction_of_period
//! ```
//!
//! Zero-coupon bonds accrue nothing. Coupon dates are generated from the
//! dated date in steps of 12/frequency months.

use crate::error::Error;
use crate::Result;
use chrono::{Datelike, NaiveDate};

/// Supported day-count bases. Other FISD codes are rejected at ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DayCount {
    /// 30/360 US convention.
    Thirty360,
    /// Actual/actual within the coupon period.
    ActAct,
}

impl std::str::FromStr for DayCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "30/360" | "30_360" | "THIRTY360" => Ok(DayCount::Thirty360),
            "ACT/ACT" | "ACT_ACT" | "ACTACT" => Ok(DayCount::ActAct),
            other => Err(Error::UnsupportedDayCount(other.to_string())),
        }
    }
}

/// Day count between two dates under the 30/360 US rule.
pub fn days_30_360(start: NaiveDate, end: NaiveDate) -> i64 {
    let (y1, m1, mut d1) = (start.year() as i64, start.month() as i64, start.day() as i64);
    let (y2, m2, mut d2) = (end.year() as i64, end.month() as i64, end.day() as i64);
    if d1 == 31 {
        d1 = 30;
    }
    if d2 == 31 && d1 == 30 {
        d2 = 30;
    }
    360 * (y2 - y1) + 30 * (m2 - m1) + (d2 - d1)
}

/// Terms needed to accrue interest on one bond.
#[derive(Debug, Clone)]
pub struct AccrualTerms {
    /// Annual coupon rate in percent of face.
    pub coupon_rate: f64,
    /// Coupon payments per year; zero for zero-coupon bonds.
    pub frequency: u32,
    pub day_count: DayCount,
    /// Date from which interest accrues.
    pub dated_date: NaiveDate,
    pub maturity_date: NaiveDate,
}

impl AccrualTerms {
    fn months_per_period(&self) -> u32 {
        debug_assert!(self.frequency > 0);
        12 / self.frequency
    }

    /// Coupon payment dates in `(from, to]`, ascending.
    pub fn coupon_dates_between(&self, from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
        if self.frequency == 0 || self.coupon_rate == 0.0 {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut k = 1u32;
        loop {
            let d = add_months(self.dated_date, (k * self.months_per_period()) as i32);
            if d > to || d > self.maturity_date {
                break;
            }
            if d > from {
                out.push(d);
            }
            k += 1;
        }
        out
    }

    /// Coupon amount paid per payment date, per 100 face.
    pub fn coupon_per_period(&self) -> f64 {
        if self.frequency == 0 {
            0.0
        } else {
            self.coupon_rate / self.frequency as f64
        }
    }

    /// Start of the coupon period containing `date` (the latest coupon date
    /// at or before `date`, or the dated date).
    fn period_start(&self, date: NaiveDate) -> NaiveDate {
        let mut k = 0u32;
        let mut start = self.dated_date;
        loop {
            let next = add_months(self.dated_date, ((k + 1) * self.months_per_period()) as i32);
            if next > date {
                return start;
            }
            start = next;
            k += 1;
        }
    }

    /// Accrued interest at `date`, per 100 face.
    pub fn accrued_interest(&self, date: NaiveDate) -> Result<f64> {
        if date < self.dated_date {
            return Err(Error::BeforeDatedDate {
                date,
                dated: self.dated_date,
            });
        }
        if self.frequency == 0 || self.coupon_rate == 0.0 {
            return Ok(0.0);
        }
        let start = self.period_start(date);
        let end = add_months(start, self.months_per_period() as i32);
        let fraction = match self.day_count {
            DayCount::Thirty360 => {
                let period = 360.0 / self.frequency as f64;
                days_30_360(start, date) as f64 / period
            }
            DayCount::ActAct => {
                let period = (end - start).num_days() as f64;
                (date - start).num_days() as f64 / period
            }
        };
        Ok(self.coupon_per_period() * fraction)
    }
}

/// `date` shifted by `months`, clamping the day to the target month's length.
pub fn add_months(date: NaiveDate, months: i32) -> NaiveDate {
    let total = date.year() * 12 + date.month() as i32 - 1 + months;
    let (y, m) = (total.div_euclid(12), total.rem_euclid(12) as u32 + 1);
    let day = date.day();
    (0..4)
        .filter_map(|back| NaiveDate::from_ymd_opt(y, m, day.saturating_sub(back).max(1)))
        .next()
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn semi_6pct() -> AccrualTerms {
        AccrualTerms {
            coupon_rate: 6.0,
            frequency: 2,
            day_count: DayCount::Thirty360,
            dated_date: date(2010, 1, 15),
            maturity_date: date(2020, 1, 15),
        }
    }

    #[test]
    fn zero_coupon_accrues_nothing() {
        let terms = AccrualTerms {
            coupon_rate: 0.0,
            frequency: 0,
            ..semi_6pct()
        };
        assert_eq!(terms.accrued_interest(date(2012, 6, 1)).unwrap(), 0.0);
        assert!(terms.coupon_dates_between(date(2010, 1, 1), date(2020, 1, 1)).is_empty());
    }

    #[test]
    fn ninety_days_into_semiannual_period() {
        // 6% semiannual, 30/360: 90 days into the period accrues 3.0 * 90/180.
        let terms = semi_6pct();
        // 2010-01-15 + 90 days (30/360) = 2010-04-15.
        assert_eq!(days_30_360(date(2010, 1, 15), date(2010, 4, 15)), 90);
        assert_abs_diff_eq!(
            terms.accrued_interest(date(2010, 4, 15)).unwrap(),
            1.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn period_start_resets() {
        let terms = semi_6pct();
        assert_eq!(terms.accrued_interest(date(2010, 7, 15)).unwrap(), 0.0);
        assert_eq!(terms.accrued_interest(date(2011, 1, 15)).unwrap(), 0.0);
    }

    #[test]
    fn before_dated_date_rejected() {
        let terms = semi_6pct();
        assert!(terms.accrued_interest(date(2009, 12, 31)).is_err());
    }

    #[test]
    fn act_act_fraction() {
        let terms = AccrualTerms {
            day_count: DayCount::ActAct,
            ..semi_6pct()
        };
        // Period 2010-01-15..2010-07-15 has 181 days.
        let ai = terms.accrued_interest(date(2010, 2, 14)).unwrap();
        assert_abs_diff_eq!(ai, 3.0 * 30.0 / 181.0, epsilon = 1e-12);
    }

    #[test]
    fn coupon_dates_window() {
        let terms = semi_6pct();
        let dates = terms.coupon_dates_between(date(2010, 1, 15), date(2011, 1, 15));
        assert_eq!(dates, vec![date(2010, 7, 15), date(2011, 1, 15)]);
    }

    #[test]
    fn ai_nondecreasing_within_period() {
        let terms = semi_6pct();
        let mut prev = 0.0;
        for day in 0..180 {
            let d = date(2010, 1, 15) + chrono::Duration::days(day);
            let ai = terms.accrued_interest(d).unwrap();
            assert!(ai + 1e-12 >= prev, "AI decreased at {d}");
            prev = ai;
        }
    }

    #[test]
    fn month_end_clamping() {
        assert_eq!(add_months(date(2010, 1, 31), 1), date(2010, 2, 28));
        assert_eq!(add_months(date(2010, 8, 31), 1), date(2010, 9, 30));
    }
}
