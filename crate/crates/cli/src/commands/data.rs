use std::collections::HashSet;

use chrono::NaiveDate;
use sentcast::market::{parse_ohlcv_csv, BusinessCalendar, PriceSeries};
use sentcast::parallel;
use sentcast::text::{
    aggregate_daily_text, align_panel, attach_embeddings, clean_tweet, filter_corpus, read_embeddings_csv,
    read_panel_csv, read_tweets_csv, write_panel_csv, write_tweets_csv, AlignedPanel, DailyTextFeatures,
};

use crate::artifacts::{read_json, write_json, write_with, Layout};
use crate::config::RunConfig;
use crate::error::{require, CliError, CliResult};

pub fn preprocess(cfg: &RunConfig, out: &Layout) -> CliResult<()> {
    require(&cfg.paths.tweets, "tweets file, `paths.tweets`")?;
    let mut tweets = read_tweets_csv(&cfg.paths.tweets)?;
    let known: HashSet<String> = cfg.tickers.iter().cloned().collect();
    let before = tweets.len();
    tweets.retain(|t| known.contains(&t.ticker));
    if tweets.len() < before {
        log::info!("{} tweets belong to unconfigured tickers", before - tweets.len());
    }
    let (kept, stats) = filter_corpus(&tweets, &known);
    let cleaned: Vec<_> = kept
        .into_iter()
        .map(|mut t| {
            t.body = clean_tweet(&t.body);
            t
        })
        .collect();
    write_with(&out.clean_tweets(), |p| write_tweets_csv(p, &cleaned))?;
    write_json(&out.filter_stats(), &stats)?;
    println!("preprocess: kept {} of {} tweets -> {}", stats.kept, stats.input, out.clean_tweets().display());
    Ok(())
}

fn calendar(cfg: &RunConfig, days: impl Iterator<Item = NaiveDate>) -> CliResult<BusinessCalendar> {
    let holidays = match &cfg.paths.holidays {
        Some(p) => {
            require(p, "holiday file, `paths.holidays`")?;
            BusinessCalendar::read_holidays(p)?
        }
        None => Default::default(),
    };
    let (lo, hi) = days.fold((NaiveDate::MAX, NaiveDate::MIN), |(lo, hi), d| (lo.min(d), hi.max(d)));
    if lo > hi {
        return Err(CliError::validation("no tweets survived preprocessing"));
    }
    Ok(BusinessCalendar::new(lo, hi, holidays))
}

pub fn features(cfg: &RunConfig, out: &Layout) -> CliResult<()> {
    require(&out.clean_tweets(), "run `sentcast preprocess` first")?;
    for t in &cfg.tickers {
        require(&cfg.paths.ohlcv_dir.join(format!("{t}.csv")), "price file for a configured ticker")?;
    }
    let mut tweets = read_tweets_csv(&out.clean_tweets())?;
    if let Some(p) = &cfg.paths.embeddings {
        require(p, "embeddings file, `paths.embeddings`")?;
        let table = read_embeddings_csv(p)?;
        attach_embeddings(&mut tweets, &table);
        let missing = tweets.iter().filter(|t| t.embedding.is_none()).count();
        if missing > 0 {
            log::warn!("{missing} tweets have no embedding row");
        }
    }
    let cal = calendar(cfg, tweets.iter().map(|t| t.day()))?;
    let daily = aggregate_daily_text(&tweets, &cal)?;

    let span = cfg.features.smoothing_span;
    let built: Vec<sentcast::Result<(PriceSeries, AlignedPanel)>> = parallel::map_slice(&cfg.tickers, |t| {
        let prices = parse_ohlcv_csv(&cfg.paths.ohlcv_dir.join(format!("{t}.csv")), t, &cal)?;
        let panel = align_panel(&prices, &daily, &cal, span)?;
        Ok((prices, panel))
    });
    let mut panels = Vec::with_capacity(built.len());
    for (t, r) in cfg.tickers.iter().zip(built) {
        let (prices, panel) = r?;
        if panel.len() < prices.len() {
            log::info!("{t}: {} of {} price rows overlap the tweet range", panel.len(), prices.len());
        }
        panels.push(panel);
    }
    for p in &panels {
        write_with(&out.panel(&p.ticker), |path| write_panel_csv(path, p))?;
    }
    write_json(&out.daily_text(), &daily)?;
    let rows: Vec<String> = panels.iter().map(|p| format!("{} {} rows", p.ticker, p.len())).collect();
    println!("features: {} -> {}", rows.join(", "), out.root().join("features").display());
    Ok(())
}

/// Aligned panels in configured ticker order.
pub fn load_panels(cfg: &RunConfig, out: &Layout) -> CliResult<Vec<AlignedPanel>> {
    let mut panels = Vec::with_capacity(cfg.tickers.len());
    for t in &cfg.tickers {
        let path = out.panel(t);
        require(&path, "run `sentcast features` first")?;
        panels.push(read_panel_csv(&path, t)?);
    }
    let dim = panels[0].embedding_dim();
    if let Some(p) = panels.iter().find(|p| p.embedding_dim() != dim) {
        return Err(CliError::validation(format!(
            "{} has embeddings of width {}, {} has {dim}",
            p.ticker,
            p.embedding_dim(),
            panels[0].ticker
        )));
    }
    Ok(panels)
}

pub fn load_daily_text(out: &Layout) -> CliResult<Vec<DailyTextFeatures>> {
    read_json(&out.daily_text(), "run `sentcast features` first")
}
