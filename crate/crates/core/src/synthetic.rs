//! Seeded synthetic panels and raw corpora for tests, benches and the
//! bundled fixture.

use chrono::{Datelike, Duration, NaiveDate, NaiveTime, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::market::{day_of_week_index, is_weekend, OhlcvBar, PriceSeries};
use crate::text::{AlignedPanel, PanelRow, Sentiment, TweetRecord};

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 1, 4).expect("valid date")
}

/// `n` consecutive weekdays starting on a Monday.
pub fn weekdays(n: usize) -> Vec<NaiveDate> {
    epoch().iter_days().filter(|d| !is_weekend(*d)).take(n).collect()
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Panel rows around a close path; the other market columns are noise.
fn rows_from_close(close: &[f64], score: &[f64], embedding: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<PanelRow> {
    let dates = weekdays(close.len());
    let mut prev = close.first().copied().unwrap_or(0.0);
    close
        .iter()
        .enumerate()
        .map(|(t, &c)| {
            let open = prev + 0.3 * gauss(rng);
            prev = c;
            PanelRow {
                date: dates[t],
                high: c.max(open) + (0.5 * gauss(rng)).abs(),
                low: c.min(open) - (0.5 * gauss(rng)).abs(),
                open,
                volume: 1e6 * (0.3 * gauss(rng)).exp(),
                close: c,
                raw_score: score[t],
                score: score[t],
                embedding: embedding.get(t).cloned().unwrap_or_default(),
                holiday: false,
                dow: day_of_week_index(dates[t]),
            }
        })
        .collect()
}

/// `close_t = slope·(t + 1) + N(0, noise²)`.
pub fn trend_panel(ticker: &str, len: usize, slope: f64, noise: f64, seed: u64) -> AlignedPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let close: Vec<f64> = (0..len).map(|t| slope * (t + 1) as f64 + noise * gauss(&mut rng)).collect();
    let score: Vec<f64> = (0..len).map(|_| gauss(&mut rng)).collect();
    AlignedPanel {
        ticker: ticker.into(),
        rows: rows_from_close(&close, &score, &[], &mut rng),
    }
}

/// A random pattern of length `period` around 100, repeated, plus noise.
pub fn seasonal_panel(ticker: &str, len: usize, period: usize, noise: f64, seed: u64) -> AlignedPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pattern: Vec<f64> = (0..period).map(|_| rng.random_range(90.0..110.0)).collect();
    let close: Vec<f64> = (0..len).map(|t| pattern[t % period] + noise * gauss(&mut rng)).collect();
    let score = vec![0.0; len];
    AlignedPanel {
        ticker: ticker.into(),
        rows: rows_from_close(&close, &score, &[], &mut rng),
    }
}

/// Settings for panels whose close is driven by a hidden sentiment process.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSentiment {
    pub len: usize,
    pub embedding_dim: usize,
    /// Mean reversion of the latent price level.
    pub persistence: f64,
    /// Effect of today's sentiment on tomorrow's level.
    pub coupling: f64,
    pub level_noise: f64,
    /// Noise on the observed score column.
    pub score_noise: f64,
    /// Per-dimension noise on the embedding columns.
    pub embedding_noise: f64,
    /// Price units per unit of level.
    pub price_scale: f64,
}

impl Default for LatentSentiment {
    fn default() -> Self {
        Self {
            len: 300,
            embedding_dim: 16,
            persistence: 0.9,
            coupling: 1.0,
            level_noise: 0.3,
            score_noise: 0.3,
            embedding_noise: 1.0,
            price_scale: 4.0,
        }
    }
}

/// The hidden sentiment and level paths behind one latent panel.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPaths {
    pub sentiment: Vec<f64>,
    pub level: Vec<f64>,
}

fn latent_paths(spec: &LatentSentiment, rng: &mut ChaCha8Rng) -> LatentPaths {
    let sentiment: Vec<f64> = (0..spec.len).map(|_| gauss(rng)).collect();
    let stationary_sd = ((spec.coupling.powi(2) + spec.level_noise.powi(2)) / (1.0 - spec.persistence.powi(2))).sqrt();
    let mut level = Vec::with_capacity(spec.len);
    let mut x = stationary_sd * gauss(rng);
    for t in 0..spec.len {
        level.push(x);
        x = spec.persistence * x + spec.coupling * sentiment[t] + spec.level_noise * gauss(rng);
    }
    LatentPaths { sentiment, level }
}

/// `n_companies` panels where `level_{t+1} = φ·level_t + c·s_t + ε`,
/// `close = base + scale·level`, the score column observes `s_t` with noise
/// and the embedding columns carry `s_t` along a random unit direction
/// buried in isotropic noise.
pub fn latent_sentiment_panels(n_companies: usize, spec: &LatentSentiment, seed: u64) -> Vec<AlignedPanel> {
    latent_sentiment_panels_with_paths(n_companies, spec, seed).into_iter().map(|(p, _)| p).collect()
}

pub fn latent_sentiment_panels_with_paths(
    n_companies: usize,
    spec: &LatentSentiment,
    seed: u64,
) -> Vec<(AlignedPanel, LatentPaths)> {
    (0..n_companies)
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(c as u64));
            let paths = latent_paths(spec, &mut rng);
            let base = 100.0 + 20.0 * c as f64;
            let close: Vec<f64> = paths.level.iter().map(|l| base + spec.price_scale * l).collect();
            let score: Vec<f64> = paths.sentiment.iter().map(|s| s + spec.score_noise * gauss(&mut rng)).collect();
            let d = spec.embedding_dim;
            let mut u: Vec<f64> = (0..d).map(|_| gauss(&mut rng)).collect();
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            u.iter_mut().for_each(|v| *v /= norm);
            let emb: Vec<Vec<f64>> = paths
                .sentiment
                .iter()
                .map(|s| u.iter().map(|ui| s * ui + spec.embedding_noise * gauss(&mut rng)).collect())
                .collect();
            let panel = AlignedPanel {
                ticker: format!("SYN{c}"),
                rows: rows_from_close(&close, &score, &emb, &mut rng),
            };
            (panel, paths)
        })
        .collect()
}

/// Raw inputs for the full pipeline: daily bars, a tweet corpus with its
/// embedding table, and a holiday list.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub prices: Vec<PriceSeries>,
    pub tweets: Vec<TweetRecord>,
    pub embeddings: Vec<(String, Vec<f64>)>,
    pub embedding_dim: usize,
    pub holidays: Vec<NaiveDate>,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

const WORDS_UP: &[&str] = &["beat", "rally", "upgrade", "strong", "record", "buy", "growth", "bullish"];
const WORDS_DOWN: &[&str] = &["miss", "selloff", "downgrade", "weak", "lawsuit", "sell", "recall", "bearish"];
const WORDS_NEUTRAL: &[&str] = &["earnings", "today", "guidance", "chart", "volume", "market", "week", "call"];

/// `n_days` business days of bars for each ticker plus tweets posted on
/// every calendar day (weekends included). Tweet sentiment follows a hidden
/// daily process that also drives next-day returns. The corpus includes a
/// few tweets with no writer, tweets naming two tickers, and duplicate
/// posts, so cleaning has work to do.
pub fn corpus(tickers: &[&str], n_days: usize, embedding_dim: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = epoch();
    let holiday = NaiveDate::from_ymd_opt(2021, 1, 18).expect("valid date");
    let holidays = vec![holiday];
    let business: Vec<NaiveDate> = start
        .iter_days()
        .filter(|d| !is_weekend(*d) && *d != holiday)
        .take(n_days)
        .collect();
    let end = *business.last().unwrap_or(&start);
    let all_days: Vec<NaiveDate> = start.iter_days().take_while(|d| *d <= end).collect();
    let noon = NaiveTime::from_hms_opt(12, 0, 0).expect("valid time");
    let normal = Normal::new(0.0, 1.0).expect("valid normal");

    let mut prices = Vec::new();
    let mut tweets = Vec::new();
    let mut embeddings = Vec::new();
    let mut direction: Vec<f64> = (0..embedding_dim).map(|_| normal.sample(&mut rng)).collect();
    let dn = direction.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
    direction.iter_mut().for_each(|v| *v /= dn);
    let mut next_id = 1u64;

    for (k, ticker) in tickers.iter().enumerate() {
        // hidden daily sentiment over calendar days
        let mood: Vec<f64> = all_days.iter().map(|_| normal.sample(&mut rng)).collect();
        let mut level = 0.0;
        let mut bars = Vec::with_capacity(business.len());
        let mut prev_close = 80.0 + 40.0 * k as f64;
        let mut pending = 0.0;
        let mut bi = 0;
        for (di, day) in all_days.iter().enumerate() {
            if bi < business.len() && business[bi] == *day {
                level = 0.9 * level + 0.8 * pending + 0.2 * normal.sample(&mut rng);
                pending = 0.0;
                let close = (80.0 + 40.0 * k as f64) + 3.0 * level;
                let open = prev_close + 0.3 * normal.sample(&mut rng);
                let high = close.max(open) + (0.6 * normal.sample(&mut rng)).abs();
                let low = close.min(open) - (0.6 * normal.sample(&mut rng)).abs();
                bars.push(OhlcvBar {
                    date: *day,
                    open,
                    high,
                    low,
                    close,
                    adj_close: close,
                    volume: (1e6 * (0.25 * normal.sample(&mut rng)).exp()).round(),
                });
                prev_close = close;
                bi += 1;
            }
            pending += mood[di];

            let n_tweets = rng.random_range(3..=7);
            for j in 0..n_tweets {
                let p_pos = crate::nn::sigmoid(1.5 * mood[di]);
                let positive = rng.random::<f64>() < p_pos;
                let words = if positive { WORDS_UP } else { WORDS_DOWN };
                let w1 = words[rng.random_range(0..words.len())];
                let w2 = WORDS_NEUTRAL[rng.random_range(0..WORDS_NEUTRAL.len())];
                let mut body = format!("${ticker} {w1} {w2} https://t.co/x{next_id} @trader{j}");
                let mut writer = format!("user{}", rng.random_range(0..40));
                if rng.random::<f64>() < 0.03 {
                    writer.clear();
                }
                if tickers.len() > 1 && rng.random::<f64>() < 0.03 {
                    body.push_str(&format!(" ${}", tickers[(k + 1) % tickers.len()]));
                }
                let minutes = rng.random_range(0..600);
                let post = day.and_time(noon) + Duration::minutes(minutes - 300);
                let sign = if positive { 1.0 } else { -1.0 };
                let vec: Vec<f64> = direction.iter().map(|u| sign * u + 0.5 * normal.sample(&mut rng)).collect();
                let id = format!("t{next_id}");
                next_id += 1;
                embeddings.push((id.clone(), vec.clone()));
                let tweet = TweetRecord {
                    tweet_id: id,
                    writer,
                    post_date: post,
                    ticker: ticker.to_string(),
                    body,
                    sentiment: Some(if positive { Sentiment::Positive } else { Sentiment::Negative }),
                    embedding: None,
                };
                if rng.random::<f64>() < 0.04 {
                    let mut dup = tweet.clone();
                    dup.tweet_id = format!("t{next_id}");
                    dup.post_date += Duration::minutes(5);
                    embeddings.push((dup.tweet_id.clone(), vec));
                    next_id += 1;
                    tweets.push(tweet);
                    tweets.push(dup);
                } else {
                    tweets.push(tweet);
                }
            }
        }
        prices.push(PriceSeries::new(*ticker, bars));
    }
    debug_assert!(all_days.iter().any(|d| d.weekday() == Weekday::Sat));
    Corpus {
        prices,
        tweets,
        embeddings,
        embedding_dim,
        holidays,
        start,
        end,
    }
}
