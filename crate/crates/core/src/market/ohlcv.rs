use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::calendar::BusinessCalendar;
use crate::error::{Error, Result};

pub const OHLCV_HEADER: [&str; 7] = ["date", "open", "high", "low", "close", "adj_close", "volume"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OhlcvBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: f64,
}

impl OhlcvBar {
    /// Checks the bar invariants; the error names the offending field.
    pub fn validate(&self) -> Result<()> {
        let prices = [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
            ("adj_close", self.adj_close),
        ];
        for (name, v) in prices {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::validation(name, format!("price must be finite and positive, got {v}")));
            }
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err(Error::validation("volume", format!("must be finite and non-negative, got {}", self.volume)));
        }
        if self.low > self.open.min(self.close) {
            return Err(Error::validation(
                "low",
                format!("{} exceeds min(open, close) = {}", self.low, self.open.min(self.close)),
            ));
        }
        if self.high < self.open.max(self.close) {
            return Err(Error::validation(
                "high",
                format!("{} below max(open, close) = {}", self.high, self.open.max(self.close)),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub ticker: String,
    pub bars: Vec<OhlcvBar>,
}

impl PriceSeries {
    pub fn new(ticker: impl Into<String>, bars: Vec<OhlcvBar>) -> Self {
        Self {
            ticker: ticker.into(),
            bars,
        }
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.volume).collect()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.bars.first().map(|b| b.date)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.bars.last().map(|b| b.date)
    }
}

#[derive(Debug, Deserialize)]
struct RawBar {
    date: String,
    open: f64,
    high: f64,
    low: f64,
    close: f64,
    adj_close: f64,
    volume: f64,
}

/// Reads an OHLCV CSV (`date,open,high,low,close,adj_close,volume`).
///
/// Line numbers in errors are 1-based file lines, the header being line 1.
pub fn parse_ohlcv_csv(path: &Path, ticker: &str, calendar: &BusinessCalendar) -> Result<PriceSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ohlcv_reader(file, &path.display().to_string(), ticker, calendar)
}

pub fn parse_ohlcv_reader<R: std::io::Read>(
    reader: R,
    source: &str,
    ticker: &str,
    calendar: &BusinessCalendar,
) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };

    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names != OHLCV_HEADER {
        return Err(parse_err(1, format!("expected header `{}`, found `{}`", OHLCV_HEADER.join(","), names.join(","))));
    }

    let mut bars = Vec::new();
    for (i, rec) in rdr.deserialize::<RawBar>().enumerate() {
        let line = i + 2;
        let raw = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let date = NaiveDate::parse_from_str(&raw.date, "%Y-%m-%d")
            .map_err(|e| parse_err(line, format!("bad date `{}`: {e}", raw.date)))?;
        if !calendar.is_business_day(date) {
            return Err(Error::Calendar {
                path: source.to_string(),
                line,
                date,
            });
        }
        let bar = OhlcvBar {
            date,
            open: raw.open,
            high: raw.high,
            low: raw.low,
            close: raw.close,
            adj_close: raw.adj_close,
            volume: raw.volume,
        };
        bar.validate().map_err(|e| match e {
            Error::Validation { field, message } => Error::Validation {
                field,
                message: format!("{source}:{line}: {message}"),
            },
            other => other,
        })?;
        bars.push(bar);
    }

    bars.sort_by_key(|b| b.date);
    if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(Error::validation("date", format!("{source}: duplicate date {}", w[0].date)));
    }
    Ok(PriceSeries::new(ticker, bars))
}

pub fn write_ohlcv_csv(path: &Path, series: &PriceSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    w.write_record(OHLCV_HEADER).map_err(|e| Error::io(path, e.into()))?;
    for b in &series.bars {
        w.write_record([
            b.date.format("%Y-%m-%d").to_string(),
            b.open.to_string(),
            b.high.to_string(),
            b.low.to_string(),
            b.close.to_string(),
            b.adj_close.to_string(),
            b.volume.to_string(),
        ])
        .map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal() -> BusinessCalendar {
        BusinessCalendar::weekdays(
            NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2024, 12, 31).unwrap(),
        )
    }

    fn parse(text: &str) -> Result<PriceSeries> {
        parse_ohlcv_reader(text.as_bytes(), "mem.csv", "AAA", &cal())
    }

    const HEADER: &str = "date,open,high,low,close,adj_close,volume\n";

    #[test]
    fn three_rows_sorted() {
        let text = format!(
            "{HEADER}2024-01-04,10,11,9,10.5,10.5,100\n2024-01-02,10,11,9,10,10,100\n2024-01-03,10,12,9.5,11,11,200\n"
        );
        let s = parse(&text).unwrap();
        assert_eq!(s.len(), 3);
        let dates: Vec<_> = s.bars.iter().map(|b| b.date.to_string()).collect();
        assert_eq!(dates, ["2024-01-02", "2024-01-03", "2024-01-04"]);
    }

    #[test]
    fn low_above_high_is_validation_error() {
        let text = format!("{HEADER}2024-01-02,10,9,11,10,10,100\n");
        match parse(&text) {
            Err(Error::Validation { field, .. }) => assert!(field == "low" || field == "high"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn saturday_row_rejected() {
        let text = format!("{HEADER}2024-01-05,10,11,9,10,10,1\n2024-01-06,10,11,9,10,10,1\n");
        match parse(&text) {
            Err(Error::Calendar { line, date, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(date.to_string(), "2024-01-06");
            }
            other => panic!("expected calendar error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_row_reports_line() {
        let text = format!("{HEADER}2024-01-02,10,11,9,10,10,1\n2024-01-03,ten,11,9,10,10,1\n");
        match parse(&text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(matches!(parse("date,o,h,l,c\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn negative_volume_names_field() {
        let text = format!("{HEADER}2024-01-02,10,11,9,10,10,-5\n");
        assert!(matches!(parse(&text), Err(Error::Validation { field, .. }) if field == "volume"));
    }
}
