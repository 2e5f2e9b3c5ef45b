//! Month arithmetic and the business-day calendar.
//!
//! The calendar excludes weekends and any holidays supplied by the caller.
//! The month-boundary price rules operate on the last five and first five
//! business days of adjacent months.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use std::collections::BTreeSet;

/// A calendar month, ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    pub year: i32,
    /// 1-based month number.
    pub month: u32,
}

impl Month {
    pub fn new(year: i32, month: u32) -> Self {
        assert!((1..=12).contains(&month), "month out of range: {month}");
        Month { year, month }
    }

    pub fn from_date(d: NaiveDate) -> Self {
        Month {
            year: d.year(),
            month: d.month(),
        }
    }

    /// First calendar day of the month.
    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).unwrap()
    }

    /// Last calendar day of the month.
    pub fn last_day(self) -> NaiveDate {
        self.next().first_day() - Duration::days(1)
    }

    pub fn next(self) -> Month {
        if self.month == 12 {
            Month::new(self.year + 1, 1)
        } else {
            Month::new(self.year, self.month + 1)
        }
    }

    pub fn prev(self) -> Month {
        if self.month == 1 {
            Month::new(self.year - 1, 12)
        } else {
            Month::new(self.year, self.month - 1)
        }
    }

    /// Signed number of months from `other` to `self`.
    pub fn months_since(self, other: Month) -> i64 {
        (self.year as i64 - other.year as i64) * 12 + self.month as i64 - other.month as i64
    }

    /// Month shifted by `n` months (negative shifts backwards).
    pub fn offset(self, n: i64) -> Month {
        let total = self.year as i64 * 12 + (self.month as i64 - 1) + n;
        Month::new(total.div_euclid(12) as i32, (total.rem_euclid(12) + 1) as u32)
    }

    /// Inclusive iterator over `[self, end]`.
    pub fn range_inclusive(self, end: Month) -> impl Iterator<Item = Month> {
        let mut cur = self;
        std::iter::from_fn(move || {
            if cur > end {
                None
            } else {
                let out = cur;
                cur = cur.next();
                Some(out)
            }
        })
    }
}

impl std::fmt::Display for Month {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl std::str::FromStr for Month {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s
            .split_once('-')
            .ok_or_else(|| crate::Error::data(format!("bad month `{s}`, expected YYYY-MM")))?;
        let year: i32 = y
            .parse()
            .map_err(|_| crate::Error::data(format!("bad year in `{s}`")))?;
        let month: u32 = m
            .parse()
            .map_err(|_| crate::Error::data(format!("bad month in `{s}`")))?;
        if !(1..=12).contains(&month) {
            return Err(crate::Error::data(format!("month out of range in `{s}`")));
        }
        Ok(Month::new(year, month))
    }
}

/// Business-day calendar: weekdays minus an optional holiday set.
#[derive(Debug, Clone, Default)]
pub struct BusinessCalendar {
    holidays: BTreeSet<NaiveDate>,
}

impl BusinessCalendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_holidays(holidays: impl IntoIterator<Item = NaiveDate>) -> Self {
        BusinessCalendar {
            holidays: holidays.into_iter().collect(),
        }
    }

    pub fn is_business_day(&self, d: NaiveDate) -> bool {
        !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) && !self.holidays.contains(&d)
    }

    /// All business days of `month`, ascending.
    pub fn business_days(&self, month: Month) -> Vec<NaiveDate> {
        let mut out = Vec::with_capacity(23);
        let mut d = month.first_day();
        let last = month.last_day();
        while d <= last {
            if self.is_business_day(d) {
                out.push(d);
            }
            d += Duration::days(1);
        }
        out
    }

    /// Last `n` business days of `month`, ascending.
    pub fn last_n_business_days(&self, month: Month, n: usize) -> Vec<NaiveDate> {
        let days = self.business_days(month);
        let start = days.len().saturating_sub(n);
        days[start..].to_vec()
    }

    /// First `n` business days of `month`, ascending.
    pub fn first_n_business_days(&self, month: Month, n: usize) -> Vec<NaiveDate> {
        let mut days = self.business_days(month);
        days.truncate(n);
        days
    }

    /// Number of business days in `(from, to]`; zero when `to <= from`.
    pub fn business_days_between(&self, from: NaiveDate, to: NaiveDate) -> usize {
        if to <= from {
            return 0;
        }
        let mut d = from + Duration::days(1);
        let mut n = 0;
        while d <= to {
            if self.is_business_day(d) {
                n += 1;
            }
            d += Duration::days(1);
        }
        n
    }
}
