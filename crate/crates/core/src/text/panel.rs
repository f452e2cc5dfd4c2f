use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::daily::DailyTextFeatures;
use crate::error::{Error, Result};
use crate::market::{day_of_week_index, ewma, BusinessCalendar, PriceSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub date: NaiveDate,
    pub high: f64,
    pub low: f64,
    pub open: f64,
    pub volume: f64,
    pub close: f64,
    /// Daily sentiment score 2 after gap filling, before smoothing.
    pub raw_score: f64,
    /// EWMA of `raw_score`; the model's sentiment input.
    pub score: f64,
    pub embedding: Vec<f64>,
    pub holiday: bool,
    /// Monday = 0.
    pub dow: usize,
}

/// One company's gap-free business-day table of market and text features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPanel {
    pub ticker: String,
    pub rows: Vec<PanelRow>,
}

impl AlignedPanel {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn embedding_dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.embedding.len())
    }

    pub fn column(&self, f: impl Fn(&PanelRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }
}

/// Joins prices with daily text features over the intersection of their
/// date spans.
///
/// Days without a sentiment score take the previous day's raw score (leading
/// days take the first available one); embeddings are filled the same way.
/// The score column is the EWMA of the filled raw score.
pub fn align_panel(
    prices: &PriceSeries,
    text: &[DailyTextFeatures],
    calendar: &BusinessCalendar,
    smoothing_span: usize,
) -> Result<AlignedPanel> {
    if smoothing_span == 0 {
        return Err(Error::Parameter("smoothing span must be at least 1".into()));
    }
    let mut text: Vec<&DailyTextFeatures> = text.iter().filter(|d| d.ticker == prices.ticker).collect();
    text.sort_by_key(|d| d.business_day);

    let (p0, p1) = match (prices.first_date(), prices.last_date()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Alignment(format!("no price bars for {}", prices.ticker))),
    };
    let (t0, t1) = match (text.first(), text.last()) {
        (Some(a), Some(b)) => (a.business_day, b.business_day),
        _ => return Err(Error::Alignment(format!("no text features for {}", prices.ticker))),
    };
    let start = p0.max(t0);
    let end = p1.min(t1);
    if start > end {
        return Err(Error::Alignment(format!(
            "{}: prices cover {p0}..{p1} but text covers {t0}..{t1}",
            prices.ticker
        )));
    }

    let days = calendar.days_between(start, end);
    let mut bars = prices.bars.iter().filter(|b| b.date >= start && b.date <= end).peekable();
    let mut text_iter = text.iter().peekable();

    // Carry-in from text days before the range.
    let mut last_score: Option<f64> = None;
    let mut last_emb: Option<Vec<f64>> = None;
    while let Some(d) = text_iter.next_if(|d| d.business_day < start) {
        last_score = d.score2.or(last_score);
        last_emb = d.mean_embedding.clone().or(last_emb);
    }

    let mut scores: Vec<Option<f64>> = Vec::with_capacity(days.len());
    let mut embs: Vec<Option<Vec<f64>>> = Vec::with_capacity(days.len());
    let mut rows = Vec::with_capacity(days.len());
    for &day in &days {
        let bar = match bars.next() {
            Some(b) if b.date == day => b,
            Some(b) => {
                return Err(Error::Alignment(format!(
                    "{}: no price bar for business day {day} (next bar is {}); supply a holiday file if the exchange was closed",
                    prices.ticker, b.date
                )))
            }
            None => {
                return Err(Error::Alignment(format!("{}: no price bar for business day {day}", prices.ticker)))
            }
        };
        while let Some(d) = text_iter.next_if(|d| d.business_day <= day) {
            last_score = d.score2.or(last_score);
            last_emb = d.mean_embedding.clone().or(last_emb);
        }
        scores.push(last_score);
        embs.push(last_emb.clone());
        rows.push(PanelRow {
            date: day,
            high: bar.high,
            low: bar.low,
            open: bar.open,
            volume: bar.volume,
            close: bar.close,
            raw_score: 0.0,
            score: 0.0,
            embedding: Vec::new(),
            holiday: calendar.follows_holiday(day),
            dow: day_of_week_index(day),
        });
    }
    if let Some(extra) = bars.next() {
        return Err(Error::Alignment(format!(
            "{}: price bar on {} is not a business day of the calendar",
            prices.ticker, extra.date
        )));
    }

    let raw = backfill(scores).unwrap_or_else(|| {
        log::warn!("{}: no sentiment scores in range, using zeros", prices.ticker);
        vec![0.0; days.len()]
    });
    let smoothed = ewma(&raw, smoothing_span);
    let embs = backfill(embs).unwrap_or_else(|| vec![Vec::new(); days.len()]);
    for (((row, r), s), e) in rows.iter_mut().zip(raw).zip(smoothed).zip(embs) {
        row.raw_score = r;
        row.score = s;
        row.embedding = e;
    }
    Ok(AlignedPanel {
        ticker: prices.ticker.clone(),
        rows,
    })
}

/// Replaces leading `None`s with the first available value.
fn backfill<T: Clone>(values: Vec<Option<T>>) -> Option<Vec<T>> {
    let first = values.iter().flatten().next()?.clone();
    Some(values.into_iter().map(|v| v.unwrap_or_else(|| first.clone())).collect())
}

const PANEL_FIXED_COLUMNS: [&str; 10] =
    ["date", "high", "low", "open", "volume", "close", "raw_score", "score", "holiday", "dow"];

pub fn write_panel_csv(path: &Path, panel: &AlignedPanel) -> Result<()> {
    let io = |e: csv::Error| Error::io(path, e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let dim = panel.embedding_dim();
    let mut header: Vec<String> = PANEL_FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..dim).map(|j| format!("e{j}")));
    w.write_record(&header).map_err(io)?;
    for r in &panel.rows {
        let mut rec = vec![
            r.date.format("%Y-%m-%d").to_string(),
            r.high.to_string(),
            r.low.to_string(),
            r.open.to_string(),
            r.volume.to_string(),
            r.close.to_string(),
            r.raw_score.to_string(),
            r.score.to_string(),
            u8::from(r.holiday).to_string(),
            r.dow.to_string(),
        ];
        rec.extend(r.embedding.iter().map(|x| x.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_panel_csv(path: &Path, ticker: &str) -> Result<AlignedPanel> {
    let source = path.display().to_string();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.clone(),
        line,
        message,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.len() < PANEL_FIXED_COLUMNS.len()
        || header.iter().take(PANEL_FIXED_COLUMNS.len()).ne(PANEL_FIXED_COLUMNS.iter().copied())
    {
        return Err(parse_err(1, format!("expected panel header starting `{}`", PANEL_FIXED_COLUMNS.join(","))));
    }
    let dim = header.len() - PANEL_FIXED_COLUMNS.len();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        let num = |j: usize| -> Result<f64> {
            rec[j].parse::<f64>().map_err(|e| parse_err(line, format!("column {}: {e}", header[j].to_string())))
        };
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|e| parse_err(line, e.to_string()))?;
        let embedding = (0..dim).map(|j| num(PANEL_FIXED_COLUMNS.len() + j)).collect::<Result<Vec<_>>>()?;
        rows.push(PanelRow {
            date,
            high: num(1)?,
            low: num(2)?,
            open: num(3)?,
            volume: num(4)?,
            close: num(5)?,
            raw_score: num(6)?,
            score: num(7)?,
            holiday: num(8)? != 0.0,
            dow: num(9)? as usize,
            embedding,
        });
    }
    Ok(AlignedPanel {
        ticker: ticker.to_string(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::OhlcvBar;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn cal() -> BusinessCalendar {
        BusinessCalendar::weekdays(d("2024-01-01"), d("2024-03-31"))
    }

    fn prices(days: &[&str]) -> PriceSeries {
        let bars = days
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let c = 10.0 + i as f64;
                OhlcvBar {
                    date: d(s),
                    open: c,
                    high: c + 1.0,
                    low: c - 1.0,
                    close: c,
                    adj_close: c,
                    volume: 100.0,
                }
            })
            .collect();
        PriceSeries::new("AAA", bars)
    }

    fn text(day: &str, score2: Option<f64>, emb: Option<Vec<f64>>) -> DailyTextFeatures {
        DailyTextFeatures {
            business_day: d(day),
            ticker: "AAA".into(),
            n_pos: 1,
            n_neg: 1,
            n_tweets: 2,
            score1: score2.map(|s| s / (1.0 + s)),
            score2,
            mean_embedding: emb,
        }
    }

    const WEEK: [&str; 5] = ["2024-01-08", "2024-01-09", "2024-01-10", "2024-01-11", "2024-01-12"];

    #[test]
    fn full_overlap_no_fills() {
        let t: Vec<_> = WEEK.iter().enumerate().map(|(i, s)| text(s, Some(i as f64), None)).collect();
        let p = align_panel(&prices(&WEEK), &t, &cal(), 15).unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(p.column(|r| r.raw_score), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.rows[0].dow, 0);
        assert_eq!(p.rows[4].dow, 4);
    }

    #[test]
    fn gap_is_forward_filled_before_smoothing() {
        let t = vec![
            text(WEEK[0], Some(0.5), Some(vec![1.0])),
            text(WEEK[1], Some(2.0), Some(vec![2.0])),
            text(WEEK[3], Some(1.0), Some(vec![3.0])),
            text(WEEK[4], Some(1.5), Some(vec![4.0])),
        ];
        let p = align_panel(&prices(&WEEK), &t, &cal(), 3).unwrap();
        assert_eq!(p.rows[2].raw_score, p.rows[1].raw_score);
        assert_eq!(p.rows[2].embedding, vec![2.0]);
        assert_eq!(p.column(|r| r.score), ewma(&p.column(|r| r.raw_score), 3));
    }

    #[test]
    fn leading_days_backfilled() {
        let t = vec![text(WEEK[0], None, None), text(WEEK[2], Some(3.0), None), text(WEEK[4], Some(1.0), None)];
        let p = align_panel(&prices(&WEEK), &t, &cal(), 15).unwrap();
        assert_eq!(p.column(|r| r.raw_score), vec![3.0, 3.0, 3.0, 3.0, 1.0]);
    }

    #[test]
    fn disjoint_ranges_error() {
        let t = vec![text("2024-02-05", Some(1.0), None)];
        assert!(matches!(align_panel(&prices(&WEEK), &t, &cal(), 15), Err(Error::Alignment(_))));
    }

    #[test]
    fn missing_price_day_errors() {
        let t: Vec<_> = WEEK.iter().map(|s| text(s, Some(1.0), None)).collect();
        let p = prices(&["2024-01-08", "2024-01-09", "2024-01-11", "2024-01-12"]);
        assert!(matches!(align_panel(&p, &t, &cal(), 15), Err(Error::Alignment(_))));
    }

    #[test]
    fn panel_csv_round_trip() {
        let t: Vec<_> = WEEK.iter().map(|s| text(s, Some(0.3), Some(vec![0.1, -0.2]))).collect();
        let p = align_panel(&prices(&WEEK), &t, &cal(), 15).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("AAA.csv");
        write_panel_csv(&path, &p).unwrap();
        assert_eq!(read_panel_csv(&path, "AAA").unwrap(), p);
    }

    #[test]
    fn one_row_per_business_day() {
        let days: Vec<String> = cal().days_between(d("2024-01-02"), d("2024-02-29")).iter().map(|x| x.to_string()).collect();
        let refs: Vec<&str> = days.iter().map(String::as_str).collect();
        let t: Vec<_> = refs.iter().step_by(3).map(|s| text(s, Some(1.0), None)).collect();
        let p = align_panel(&prices(&refs), &t, &cal(), 15).unwrap();
        let covered = cal().days_between(p.rows[0].date, p.rows.last().unwrap().date);
        assert_eq!(p.rows.iter().map(|r| r.date).collect::<Vec<_>>(), covered);
    }
}
