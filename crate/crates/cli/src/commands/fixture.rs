use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use sentcast::checkpoint::write_atomic;
use sentcast::market::write_ohlcv_csv;
use sentcast::selfcheck::{gradient_suite, GRADCHECK_DELTA, GRADCHECK_TOL};
use sentcast::synthetic::corpus;
use sentcast::text::{write_embeddings_csv, write_tweets_csv};

use crate::artifacts::write_with;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct FixtureArgs {
    /// Directory to populate.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "AAA,BBB")]
    pub tickers: Vec<String>,
    /// Business days of prices per ticker.
    #[arg(long, default_value_t = 160)]
    pub days: usize,
    #[arg(long, default_value_t = 8)]
    pub embedding_dim: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

fn config_text(tickers: &[String]) -> String {
    let list: Vec<String> = tickers.iter().map(|t| format!("\"{t}\"")).collect();
    format!(
        r#"# Small synthetic run: two tickers, tiny models, a few epochs.
seed = 7
tickers = [{}]

paths.ohlcv_dir = "ohlcv"
paths.tweets = "tweets.csv"
paths.embeddings = "embeddings.csv"
paths.holidays = "holidays.txt"
paths.output = "out"

features.smoothing_span = 15
features.atr_period = 14

model.runs = ["tft_lite:HLOVS", "tft_lite:HLOVE", "nlinear:HLOV"]
model.test_split = 0.8

train.lookback = 10
train.horizon = 3
train.hidden_size = 16
train.n_heads = 4
train.hidden_continuous_size = 8
train.dropout = 0.1
train.learning_rate = 0.003
train.batch_size = 32
train.epochs = 8

grid.run = "nlinear:HLOV"
grid.lookback = [5, 10]
grid.batch_size = [16, 32]
grid.validation = 0.25
"#,
        list.join(", ")
    )
}

pub fn fixture(args: &FixtureArgs) -> CliResult<()> {
    if args.tickers.is_empty() || args.days < 40 {
        return Err(CliError::validation("fixture needs at least one ticker and 40 days"));
    }
    let tickers: Vec<&str> = args.tickers.iter().map(String::as_str).collect();
    let c = corpus(&tickers, args.days, args.embedding_dim, args.seed);
    let dir = &args.out;
    for series in &c.prices {
        write_with(&dir.join(format!("ohlcv/{}.csv", series.ticker)), |p| write_ohlcv_csv(p, series))?;
    }
    write_with(&dir.join("tweets.csv"), |p| write_tweets_csv(p, &c.tweets))?;
    write_with(&dir.join("embeddings.csv"), |p| write_embeddings_csv(p, c.embedding_dim, &c.embeddings))?;
    let holidays: String = c.holidays.iter().map(|d| format!("{d}\n")).collect();
    write_atomic(&dir.join("holidays.txt"), holidays.as_bytes())?;
    write_atomic(&dir.join("config.toml"), config_text(&args.tickers).as_bytes())?;
    println!(
        "fixture: {} tickers, {} days, {} tweets -> {}",
        tickers.len(),
        args.days,
        c.tweets.len(),
        dir.display()
    );
    Ok(())
}

pub fn selfcheck(seeds: u64) -> CliResult<()> {
    let mut worst: Vec<(&'static str, f64)> = Vec::new();
    for seed in 0..seeds {
        for (name, report) in gradient_suite(seed).context("running gradient checks")? {
            match worst.iter_mut().find(|(n, _)| *n == name) {
                Some((_, w)) => *w = w.max(report.max_rel_error),
                None => worst.push((name, report.max_rel_error)),
            }
        }
    }
    println!("gradient checks over {seeds} seeds (delta {GRADCHECK_DELTA:e}, tolerance {GRADCHECK_TOL:e})");
    let mut failed = Vec::new();
    for (name, err) in &worst {
        let ok = *err < GRADCHECK_TOL;
        println!("  {name:<22} max rel error {err:.3e}  {}", if ok { "ok" } else { "FAIL" });
        if !ok {
            failed.push(*name);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Internal(anyhow::anyhow!("gradient check failed for {}", failed.join(", "))))
    }
}
