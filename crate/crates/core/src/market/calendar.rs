use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};

use crate::error::{Error, Result};

/// Exchange calendar: weekdays minus listed holidays.
///
/// Membership is rule-based, so lookups work for any date; `start..=end`
/// only bounds what [`BusinessCalendar::days`] enumerates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BusinessCalendar {
    start: NaiveDate,
    end: NaiveDate,
    holidays: BTreeSet<NaiveDate>,
}

impl BusinessCalendar {
    pub fn new(start: NaiveDate, end: NaiveDate, holidays: impl IntoIterator<Item = NaiveDate>) -> Self {
        let (start, end) = if start <= end { (start, end) } else { (end, start) };
        Self {
            start,
            end,
            holidays: holidays.into_iter().collect(),
        }
    }

    /// Weekday calendar with no holidays.
    pub fn weekdays(start: NaiveDate, end: NaiveDate) -> Self {
        Self::new(start, end, [])
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    pub fn holidays(&self) -> &BTreeSet<NaiveDate> {
        &self.holidays
    }

    pub fn is_business_day(&self, date: NaiveDate) -> bool {
        !is_weekend(date) && !self.holidays.contains(&date)
    }

    /// `date` itself when it is a business day, otherwise the next one.
    pub fn roll_forward(&self, date: NaiveDate) -> NaiveDate {
        let mut d = date;
        while !self.is_business_day(d) {
            d += Duration::days(1);
        }
        d
    }

    pub fn next_business_day(&self, date: NaiveDate) -> NaiveDate {
        self.roll_forward(date + Duration::days(1))
    }

    /// Set on the first business day after one or more holiday closures
    /// (weekends alone do not set it).
    pub fn follows_holiday(&self, date: NaiveDate) -> bool {
        let mut d = date - Duration::days(1);
        while !self.is_business_day(d) {
            if self.holidays.contains(&d) {
                return true;
            }
            d -= Duration::days(1);
        }
        false
    }

    /// Business days in `start..=end`, ascending.
    pub fn days(&self) -> Vec<NaiveDate> {
        self.days_between(self.start, self.end)
    }

    pub fn days_between(&self, from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
        from.iter_days()
            .take_while(|d| *d <= to)
            .filter(|d| self.is_business_day(*d))
            .collect()
    }

    /// Reads a holiday file: one ISO date per line, blank lines and `#`
    /// comments ignored.
    pub fn read_holidays(path: &Path) -> Result<BTreeSet<NaiveDate>> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut out = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let date = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: format!("bad holiday date `{line}`: {e}"),
            })?;
            out.insert(date);
        }
        Ok(out)
    }
}

pub fn is_weekend(date: NaiveDate) -> bool {
    matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// Monday = 0 … Friday = 4; weekends map to 5 and 6.
pub fn day_of_week_index(date: NaiveDate) -> usize {
    date.weekday().num_days_from_monday() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn weekend_rolls_to_monday() {
        let cal = BusinessCalendar::weekdays(d("2024-01-01"), d("2024-01-31"));
        assert_eq!(cal.roll_forward(d("2024-01-06")), d("2024-01-08"));
        assert_eq!(cal.roll_forward(d("2024-01-07")), d("2024-01-08"));
        assert_eq!(cal.roll_forward(d("2024-01-08")), d("2024-01-08"));
    }

    #[test]
    fn holidays_are_skipped_and_flagged() {
        let cal = BusinessCalendar::new(d("2024-01-01"), d("2024-01-31"), [d("2024-01-15")]);
        assert!(!cal.is_business_day(d("2024-01-15")));
        assert_eq!(cal.roll_forward(d("2024-01-13")), d("2024-01-16"));
        assert!(cal.follows_holiday(d("2024-01-16")));
        assert!(!cal.follows_holiday(d("2024-01-08")));
        assert!(!cal.follows_holiday(d("2024-01-17")));
    }

    #[test]
    fn days_excludes_weekends() {
        let cal = BusinessCalendar::weekdays(d("2024-01-01"), d("2024-01-14"));
        assert_eq!(cal.days().len(), 10);
        assert!(cal.days().iter().all(|x| !is_weekend(*x)));
    }
}
