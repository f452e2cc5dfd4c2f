use serde::Serialize;
use sentcast::checkpoint::{load_checkpoint, save_checkpoint, ModelCheckpoint};
use sentcast::metrics::{compute_metrics, composite_rank_by_ticker, MetricsRecord};
use sentcast::models::{
    build_windows, forecast_windows, grid_search, naive_forecast_windows, pooled, train_model, FeatureSet, Forecast,
    Forecaster, GridOutcome, GridSettings, WindowSet,
};
use sentcast::text::AlignedPanel;

use super::data::load_panels;
use crate::artifacts::{write_csv, write_json, Layout};
use crate::config::{Run, RunConfig};
use crate::error::{require, CliError, CliResult};

pub const NAIVE_LABEL: &str = "naive_seasonal";

fn resolve(run: &Run, panels: &[AlignedPanel]) -> CliResult<FeatureSet> {
    run.resolve(panels[0].embedding_dim())
}

#[derive(Serialize)]
struct LossRow {
    epoch: usize,
    loss: f64,
}

pub fn train(cfg: &RunConfig, out: &Layout) -> CliResult<()> {
    let panels = load_panels(cfg, out)?;
    for run in &cfg.runs {
        let fs = resolve(run, &panels)?;
        let tc = cfg.train.clone();
        let set = build_windows(&panels, fs, tc.lookback, tc.horizon, cfg.test_split)?;
        let mut model = Forecaster::new(run.kind, fs, panels.len(), tc)?;
        let report = train_model(&mut model, &set.train)?;
        save_checkpoint(&model, &set.normalizer, &out.checkpoint(run.kind, fs))?;
        let rows = report.loss_curve.iter().enumerate().map(|(i, &loss)| LossRow { epoch: i + 1, loss });
        write_csv(&out.loss_curve(run.kind, fs), rows)?;
        println!(
            "train: {}:{} on {} windows, final loss {:.6} -> {}",
            run.kind,
            fs,
            set.train.len(),
            report.final_loss().unwrap_or(f64::NAN),
            out.checkpoint(run.kind, fs).display()
        );
    }
    Ok(())
}

struct Evaluated {
    fs: FeatureSet,
    set: WindowSet,
    forecasts: Vec<Forecast>,
}

/// Reloads a run's checkpoint and forecasts every test window. The panels
/// must still produce the normalizer the model was trained with.
fn forecast_run(cfg: &RunConfig, out: &Layout, panels: &[AlignedPanel], run: &Run) -> CliResult<Evaluated> {
    let fs = resolve(run, panels)?;
    let path = out.checkpoint(run.kind, fs);
    require(&path, "run `sentcast train` first")?;
    let ckpt: ModelCheckpoint = load_checkpoint(&path)?;
    if ckpt.model_type != run.kind || ckpt.feature_set != fs {
        return Err(CliError::validation(format!(
            "{} holds {}:{}, expected {}:{}",
            path.display(),
            ckpt.model_type,
            ckpt.feature_set,
            run.kind,
            fs
        )));
    }
    let model = ckpt.to_model()?;
    let set = build_windows(panels, fs, model.config.lookback, model.config.horizon, cfg.test_split)?;
    if set.normalizer != ckpt.normalizer {
        return Err(CliError::validation(format!(
            "panels or test_split changed since {} was trained; retrain",
            path.display()
        )));
    }
    if set.test.is_empty() {
        return Err(CliError::validation("no test windows; lower model.test_split or supply longer panels"));
    }
    let forecasts = forecast_windows(&model, &set.test, &set.normalizer)?;
    Ok(Evaluated { fs, set, forecasts })
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    date: String,
    ticker: &'a str,
    step: usize,
    truth: f64,
    pred: f64,
}

pub fn predict(cfg: &RunConfig, out: &Layout) -> CliResult<()> {
    let panels = load_panels(cfg, out)?;
    for run in &cfg.runs {
        let ev = forecast_run(cfg, out, &panels, run)?;
        let mut rows = Vec::new();
        for f in &ev.forecasts {
            let panel = &panels[f.company];
            for (step, (truth, pred)) in f.truth.iter().zip(&f.pred).enumerate() {
                rows.push(PredictionRow {
                    date: panel.rows[f.target_start + step].date.to_string(),
                    ticker: &panel.ticker,
                    step: step + 1,
                    truth: *truth,
                    pred: *pred,
                });
            }
        }
        let path = out.predictions(run.kind, ev.fs);
        write_csv(&path, rows)?;
        println!("predict: {}:{} {} windows -> {}", run.kind, ev.fs, ev.forecasts.len(), path.display());
    }
    Ok(())
}

fn per_ticker(
    panels: &[AlignedPanel],
    forecasts: &[Forecast],
    model: &str,
    feature_set: &str,
) -> CliResult<Vec<MetricsRecord>> {
    panels
        .iter()
        .enumerate()
        .map(|(c, p)| {
            let (truth, pred) = pooled(forecasts, Some(c));
            let metrics = compute_metrics(&truth, &pred)
                .map_err(|e| CliError::validation(format!("{} {model}:{feature_set}: {e}", p.ticker)))?;
            Ok(MetricsRecord {
                ticker: p.ticker.clone(),
                model: model.to_string(),
                feature_set: feature_set.to_string(),
                metrics,
            })
        })
        .collect()
}

pub fn evaluate(cfg: &RunConfig, out: &Layout) -> CliResult<()> {
    let panels = load_panels(cfg, out)?;
    let mut records = Vec::new();
    let mut baseline = None;
    for run in &cfg.runs {
        let ev = forecast_run(cfg, out, &panels, run)?;
        records.extend(per_ticker(&panels, &ev.forecasts, run.kind.name(), ev.fs.label())?);
        if baseline.is_none() {
            baseline = Some(naive_forecast_windows(&ev.set.test, &ev.set.normalizer)?);
        }
    }
    if let Some(naive) = baseline {
        records.extend(per_ticker(&panels, &naive, NAIVE_LABEL, "close")?);
    }
    let order = |t: &str| panels.iter().position(|p| p.ticker == t);
    records.sort_by_key(|r| order(&r.ticker));
    let ranking = composite_rank_by_ticker(&records)?;
    write_json(&out.metrics(), &records)?;
    write_json(&out.ranking(), &ranking)?;
    for (ticker, group) in &ranking {
        let best = &group[0].record;
        println!("evaluate: {ticker} best {}:{} (MAPE {:.4})", best.model, best.feature_set, best.metrics.mape);
    }
    Ok(())
}

fn enum_name<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(serde_json::Value::Object(m)) => m.get("kind").and_then(|k| k.as_str()).unwrap_or("?").to_string(),
        _ => "?".into(),
    }
}

#[derive(Serialize)]
struct LeaderboardRow {
    rank: usize,
    index: usize,
    status: &'static str,
    lookback: usize,
    hidden_size: usize,
    lstm_layers: usize,
    n_heads: usize,
    feed_forward: String,
    dropout: f64,
    hidden_continuous_size: usize,
    norm_type: String,
    optimizer: String,
    batch_size: usize,
    mape: Option<f64>,
    mae: Option<f64>,
    mse: Option<f64>,
    rmse: Option<f64>,
    r2: Option<f64>,
    smape: Option<f64>,
    final_loss: Option<f64>,
    error: Option<String>,
}

pub fn gridsearch(cfg: &RunConfig, out: &Layout) -> CliResult<()> {
    let panels = load_panels(cfg, out)?;
    let run = cfg.grid_run();
    let fs = resolve(run, &panels)?;
    let settings = GridSettings {
        kind: run.kind,
        feature_set: fs,
        test_split: cfg.test_split,
        validation: cfg.grid.validation,
    };
    let result = grid_search(&cfg.grid.space, &cfg.train, &panels, &settings)?;
    let rows = result.leaderboard.iter().enumerate().map(|(i, e)| {
        let c = &e.config;
        let (m, loss, err) = match &e.outcome {
            GridOutcome::Ok { metrics, final_loss } => (Some(*metrics), Some(*final_loss), None),
            GridOutcome::Failed { error } => (None, None, Some(error.clone())),
        };
        LeaderboardRow {
            rank: i + 1,
            index: e.index,
            status: if m.is_some() { "ok" } else { "failed" },
            lookback: c.lookback,
            hidden_size: c.hidden_size,
            lstm_layers: c.lstm_layers,
            n_heads: c.n_heads,
            feed_forward: enum_name(&c.feed_forward),
            dropout: c.dropout,
            hidden_continuous_size: c.hidden_continuous_size,
            norm_type: enum_name(&c.norm_type),
            optimizer: enum_name(&c.optimizer),
            batch_size: c.batch_size,
            mape: m.map(|m| m.mape),
            mae: m.map(|m| m.mae),
            mse: m.map(|m| m.mse),
            rmse: m.map(|m| m.rmse),
            r2: m.map(|m| m.r2),
            smape: m.map(|m| m.smape),
            final_loss: loss,
            error: err,
        }
    });
    write_csv(&out.leaderboard(), rows)?;
    #[derive(Serialize)]
    struct Best<'a> {
        model: &'a str,
        feature_set: &'a str,
        index: usize,
        config: &'a sentcast::models::TrainConfig,
    }
    write_json(
        &out.best_config(),
        &Best {
            model: run.kind.name(),
            feature_set: fs.label(),
            index: result.best_index,
            config: &result.best,
        },
    )?;
    println!(
        "gridsearch: {} points, best #{} (lookback {}) -> {}",
        result.leaderboard.len(),
        result.best_index,
        result.best.lookback,
        out.leaderboard().display()
    );
    Ok(())
}
