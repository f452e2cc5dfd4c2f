//! Business-day aggregation of per-tweet sentiment labels and embeddings.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::tweet::{Sentiment, TweetRecord};
use crate::error::{Error, Result};
use crate::market::BusinessCalendar;

/// `(share of negatives, negatives per positive)`. The second score divides
/// by `max(n_pos, 1)` so a day without positive posts stays finite.
pub fn sentiment_scores(n_neg: u64, n_pos: u64) -> Result<(f64, f64)> {
    let total = n_neg + n_pos;
    if total == 0 {
        return Err(Error::NoObservations);
    }
    let score1 = n_neg as f64 / total as f64;
    let score2 = n_neg as f64 / n_pos.max(1) as f64;
    Ok((score1, score2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyTextFeatures {
    pub business_day: NaiveDate,
    pub ticker: String,
    pub n_pos: u64,
    pub n_neg: u64,
    /// Every tweet mapped to the day, labelled or not.
    pub n_tweets: u64,
    pub score1: Option<f64>,
    pub score2: Option<f64>,
    pub mean_embedding: Option<Vec<f64>>,
}

#[derive(Default)]
struct Bucket {
    n_pos: u64,
    n_neg: u64,
    n_tweets: u64,
    n_vec: u64,
    mean: Vec<f64>,
}

/// Rolls each tweet onto its business day (weekend and holiday posts move to
/// the next business day), sums the label counts and averages embeddings.
/// Output is ordered by ticker, then day.
pub fn aggregate_daily_text(tweets: &[TweetRecord], calendar: &BusinessCalendar) -> Result<Vec<DailyTextFeatures>> {
    let mut dim: Option<usize> = None;
    let mut buckets: BTreeMap<(String, NaiveDate), Bucket> = BTreeMap::new();

    for t in tweets {
        let day = calendar.roll_forward(t.day());
        let b = buckets.entry((t.ticker.clone(), day)).or_default();
        b.n_tweets += 1;
        match t.sentiment {
            Some(Sentiment::Positive) => b.n_pos += 1,
            Some(Sentiment::Negative) => b.n_neg += 1,
            None => {}
        }
        if let Some(v) = &t.embedding {
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::validation(
                        "embedding",
                        format!("tweet {} has dimension {}, expected {d}", t.tweet_id, v.len()),
                    ))
                }
                _ => {}
            }
            // Running mean keeps k identical vectors exactly equal to the input.
            b.n_vec += 1;
            if b.n_vec == 1 {
                b.mean = v.clone();
            } else {
                let k = b.n_vec as f64;
                for (m, x) in b.mean.iter_mut().zip(v) {
                    *m += (x - *m) / k;
                }
            }
        }
    }

    Ok(buckets
        .into_iter()
        .map(|((ticker, day), b)| {
            let scores = sentiment_scores(b.n_neg, b.n_pos).ok();
            DailyTextFeatures {
                business_day: day,
                ticker,
                n_pos: b.n_pos,
                n_neg: b.n_neg,
                n_tweets: b.n_tweets,
                score1: scores.map(|s| s.0),
                score2: scores.map(|s| s.1),
                mean_embedding: (b.n_vec > 0).then_some(b.mean),
            }
        })
        .collect())
}
