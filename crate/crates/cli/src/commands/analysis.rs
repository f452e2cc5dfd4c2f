use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sentcast::market::{atr, daily_returns_sigma, ewma, min_max_scale, OhlcvBar};
use sentcast::metrics::{MetricsRecord, RankedRecord};
use sentcast::models::mix_seed;
use sentcast::stats::{probe_embeddings, spearman_table, CorrelationTable, ProbeResult};
use sentcast::text::{AlignedPanel, FilterStats};
use sentcast::{parallel, Error};

use super::data::{load_daily_text, load_panels};
use crate::artifacts::{read_json, write_csv, write_json, Layout};
use crate::config::RunConfig;
use crate::error::CliResult;

#[derive(Debug, Serialize, Deserialize)]
pub struct CorrelationPair {
    /// Volume and sentiment EWMA-smoothed.
    pub smoothed: CorrelationTable,
    pub raw: CorrelationTable,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReturnSummary {
    pub ticker: String,
    pub n_returns: usize,
    pub sum_sq: f64,
    pub sigma: f64,
}

#[derive(Serialize)]
struct HistogramRow<'a> {
    ticker: &'a str,
    bin: usize,
    lower: f64,
    upper: f64,
    count: usize,
}

fn bars(panel: &AlignedPanel) -> Vec<OhlcvBar> {
    panel
        .rows
        .iter()
        .map(|r| OhlcvBar {
            date: r.date,
            open: r.open,
            high: r.high,
            low: r.low,
            close: r.close,
            adj_close: r.close,
            volume: r.volume,
        })
        .collect()
}

fn correlations(panel: &AlignedPanel, span: usize, atr_period: usize) -> sentcast::Result<CorrelationPair> {
    let close = panel.column(|r| r.close);
    let volume = panel.column(|r| r.volume);
    let volatility = atr(&bars(panel), atr_period)?;
    let smoothed_volume = ewma(&volume, span);
    let score = panel.column(|r| r.score);
    let raw_score = panel.column(|r| r.raw_score);
    Ok(CorrelationPair {
        smoothed: spearman_table(&[
            ("close", &close),
            ("volume", &smoothed_volume),
            ("volatility", &volatility),
            ("sentiment", &score),
        ])?,
        raw: spearman_table(&[
            ("close", &close),
            ("volume", &volume),
            ("volatility", &volatility),
            ("sentiment", &raw_score),
        ])?,
    })
}

fn histogram(returns: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let (lo, hi) = returns
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    if !(lo < hi) {
        return vec![(lo, hi, returns.len())];
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for r in returns {
        let i = (((r - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + width * i as f64, lo + width * (i + 1) as f64, c))
        .collect()
}

pub fn analyze(cfg: &RunConfig, out: &Layout) -> CliResult<()> {
    let panels = load_panels(cfg, out)?;
    let span = cfg.features.smoothing_span;

    if cfg.analysis.correlations {
        let tables = parallel::map_slice(&panels, |p| correlations(p, span, cfg.features.atr_period));
        let mut by_ticker = BTreeMap::new();
        for (p, t) in panels.iter().zip(tables) {
            by_ticker.insert(p.ticker.clone(), t?);
        }
        write_json(&out.correlations(), &by_ticker)?;
    }

    if cfg.analysis.probe {
        let daily = load_daily_text(out)?;
        let mut results: Vec<ProbeResult> = Vec::new();
        for (i, p) in panels.iter().enumerate() {
            let days: Vec<_> = daily
                .iter()
                .filter(|d| d.ticker == p.ticker)
                .filter_map(|d| Some((d.mean_embedding.clone()?, d.score1?)))
                .collect();
            if days.is_empty() {
                log::warn!("{}: no days with both embeddings and labels; probe skipped", p.ticker);
                continue;
            }
            let (x, y): (Vec<Vec<f64>>, Vec<f64>) = days.into_iter().unzip();
            match probe_embeddings(&p.ticker, &x, &y, mix_seed(&[cfg.seed, i as u64])) {
                Ok(r) => results.push(r),
                Err(e @ (Error::Domain(_) | Error::Parameter(_))) => log::warn!("{}: probe skipped: {e}", p.ticker),
                Err(e) => return Err(e.into()),
            }
        }
        write_json(&out.probe(), &results)?;
    }

    let mut summaries = Vec::new();
    let mut hist_rows = Vec::new();
    for p in &panels {
        let stats = daily_returns_sigma(&p.column(|r| r.close))?;
        for (bin, (lower, upper, count)) in histogram(&stats.returns, cfg.analysis.histogram_bins).into_iter().enumerate() {
            hist_rows.push(HistogramRow {
                ticker: &p.ticker,
                bin,
                lower,
                upper,
                count,
            });
        }
        summaries.push(ReturnSummary {
            ticker: p.ticker.clone(),
            n_returns: stats.returns.len(),
            sum_sq: stats.sum_sq,
            sigma: stats.sigma,
        });
    }
    write_json(&out.returns(), &summaries)?;
    write_csv(&out.returns_histogram(), hist_rows)?;
    println!("analyze: {} tickers -> {}", panels.len(), out.root().join("analysis").display());
    Ok(())
}

fn optional<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<Option<T>> {
    if path.exists() {
        read_json(path, "").map(Some)
    } else {
        Ok(None)
    }
}

#[derive(Serialize)]
struct Report {
    tickers: Vec<String>,
    metrics: Vec<MetricsRecord>,
    ranking: BTreeMap<String, Vec<RankedRecord>>,
    correlations: Option<BTreeMap<String, CorrelationPair>>,
    probe: Option<Vec<ProbeResult>>,
    returns: Option<Vec<ReturnSummary>>,
    filter_stats: Option<FilterStats>,
    grid_best: Option<serde_json::Value>,
}

#[derive(Serialize)]
struct OverlayRow<'a> {
    date: String,
    ticker: &'a str,
    close_scaled: f64,
    sentiment_scaled: f64,
}

#[derive(Serialize)]
struct PairRow<'a> {
    date: String,
    ticker: &'a str,
    volatility_scaled: f64,
    volume_scaled: f64,
    sentiment_scaled: f64,
}

#[derive(Serialize)]
struct ScatterRow<'a> {
    date: String,
    ticker: &'a str,
    close: f64,
    volume: f64,
    volatility: f64,
    sentiment: f64,
    raw_sentiment: f64,
}

pub fn report(cfg: &RunConfig, out: &Layout) -> CliResult<()> {
    let metrics: Vec<MetricsRecord> = read_json(&out.metrics(), "run `sentcast evaluate` first")?;
    let ranking = read_json(&out.ranking(), "run `sentcast evaluate` first")?;
    let panels = load_panels(cfg, out)?;
    let report = Report {
        tickers: cfg.tickers.clone(),
        metrics,
        ranking,
        correlations: optional(&out.correlations())?,
        probe: optional(&out.probe())?,
        returns: optional(&out.returns())?,
        filter_stats: optional(&out.filter_stats())?,
        grid_best: optional(&out.best_config())?,
    };
    let dir = out.report_dir();
    write_json(&dir.join("report.json"), &report)?;

    let mut overlay = Vec::new();
    let mut pairs = Vec::new();
    let mut scatter = Vec::new();
    for p in &panels {
        let close = p.column(|r| r.close);
        let volume = p.column(|r| r.volume);
        let score = p.column(|r| r.score);
        let volatility = atr(&bars(p), cfg.features.atr_period)?;
        let smoothed_volume = ewma(&volume, cfg.features.smoothing_span);
        let (cs, ss) = (min_max_scale(&close)?, min_max_scale(&score)?);
        let (vs, ws) = (min_max_scale(&volatility)?, min_max_scale(&smoothed_volume)?);
        for (i, r) in p.rows.iter().enumerate() {
            let date = r.date.to_string();
            overlay.push(OverlayRow {
                date: date.clone(),
                ticker: &p.ticker,
                close_scaled: cs[i],
                sentiment_scaled: ss[i],
            });
            pairs.push(PairRow {
                date: date.clone(),
                ticker: &p.ticker,
                volatility_scaled: vs[i],
                volume_scaled: ws[i],
                sentiment_scaled: ss[i],
            });
            scatter.push(ScatterRow {
                date,
                ticker: &p.ticker,
                close: r.close,
                volume: r.volume,
                volatility: volatility[i],
                sentiment: r.score,
                raw_sentiment: r.raw_score,
            });
        }
    }
    write_csv(&dir.join("price_sentiment_overlay.csv"), overlay)?;
    write_csv(&dir.join("volatility_volume_sentiment.csv"), pairs)?;
    write_csv(&dir.join("scatter.csv"), scatter)?;
    println!("report: -> {}", dir.display());
    Ok(())
}
