//! Cartesian hyperparameter search ranked on a held-out tail of the
//! training region.

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::features::FeatureSet;
use super::forecaster::{forecast_windows, pooled, Forecaster, ModelKind};
use super::train::train_model;
use super::windows::{build_windows, split_index};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, Metrics};
use crate::nn::{FeedForwardKind, NormType, Optimizer};
use crate::parallel;
use crate::text::AlignedPanel;

/// Candidate values per field; an empty list keeps the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpace {
    pub lookback: Vec<usize>,
    pub hidden_size: Vec<usize>,
    pub lstm_layers: Vec<usize>,
    pub n_heads: Vec<usize>,
    pub feed_forward: Vec<FeedForwardKind>,
    pub dropout: Vec<f64>,
    pub hidden_continuous_size: Vec<usize>,
    pub norm_type: Vec<NormType>,
    pub optimizer: Vec<Optimizer>,
    pub batch_size: Vec<usize>,
}

fn or_base<T: Clone>(values: &[T], base: T) -> Vec<T> {
    if values.is_empty() {
        vec![base]
    } else {
        values.to_vec()
    }
}

impl GridSpace {
    /// The full TFT search grid (2592 points).
    pub fn tft_full() -> Self {
        Self {
            lookback: vec![5, 15, 32],
            hidden_size: vec![15, 32, 64, 80],
            lstm_layers: vec![1, 2],
            n_heads: vec![2, 4],
            feed_forward: vec![FeedForwardKind::Relu, FeedForwardKind::SwiGlu],
            dropout: vec![0.10, 0.15, 0.25, 0.5],
            hidden_continuous_size: vec![15, 32, 64],
            norm_type: vec![NormType::LayerNorm, NormType::RmsNorm],
            optimizer: vec![Optimizer::adam(), Optimizer::adamw(), Optimizer::adagrad()],
            batch_size: vec![8, 16, 32, 64],
        }
    }

    pub fn nlinear_full() -> Self {
        Self {
            lookback: vec![5, 15, 32],
            optimizer: vec![Optimizer::adam(), Optimizer::adamw(), Optimizer::adagrad()],
            batch_size: vec![8, 16, 32, 64],
            ..Self::default()
        }
    }

    /// Cartesian product over `base`, last field varying fastest.
    pub fn points(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = vec![base.clone()];
        macro_rules! expand {
            ($field:ident) => {
                let vals = or_base(&self.$field, base.$field.clone());
                out = out
                    .into_iter()
                    .flat_map(|c| {
                        vals.iter().map(move |v| TrainConfig {
                            $field: v.clone(),
                            ..c.clone()
                        })
                    })
                    .collect();
            };
        }
        expand!(lookback);
        expand!(hidden_size);
        expand!(lstm_layers);
        expand!(n_heads);
        expand!(feed_forward);
        expand!(dropout);
        expand!(hidden_continuous_size);
        expand!(norm_type);
        expand!(optimizer);
        expand!(batch_size);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GridOutcome {
    Ok { metrics: Metrics, final_loss: f64 },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    /// Position in the Cartesian enumeration.
    pub index: usize,
    pub config: TrainConfig,
    pub outcome: GridOutcome,
}

impl GridEntry {
    pub fn metrics(&self) -> Option<&Metrics> {
        match &self.outcome {
            GridOutcome::Ok { metrics, .. } => Some(metrics),
            GridOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: TrainConfig,
    pub best_index: usize,
    /// Ranked: successful points by validation MAPE, then RMSE, then index;
    /// failed points last in index order.
    pub leaderboard: Vec<GridEntry>,
}

#[derive(Debug, Clone)]
pub struct GridSettings {
    pub kind: ModelKind,
    pub feature_set: FeatureSet,
    /// Train/test split of the full panels; only the training part is used.
    pub test_split: f64,
    /// Fraction of the training part held out for ranking.
    pub validation: f64,
}

fn run_point(panels: &[AlignedPanel], settings: &GridSettings, config: &TrainConfig) -> Result<(Metrics, f64)> {
    let train_part: Vec<AlignedPanel> = panels
        .iter()
        .map(|p| AlignedPanel {
            ticker: p.ticker.clone(),
            rows: p.rows[..split_index(p.len(), settings.test_split)].to_vec(),
        })
        .collect();
    let set = build_windows(&train_part, settings.feature_set, config.lookback, config.horizon, 1.0 - settings.validation)?;
    if set.test.is_empty() {
        return Err(Error::Parameter("validation region holds no complete window".into()));
    }
    let mut model = Forecaster::new(settings.kind, settings.feature_set, panels.len(), config.clone())?;
    let report = train_model(&mut model, &set.train)?;
    let forecasts = forecast_windows(&model, &set.test, &set.normalizer)?;
    let (truth, pred) = pooled(&forecasts, None);
    let metrics = compute_metrics(&truth, &pred)?;
    Ok((metrics, report.final_loss().unwrap_or(f64::NAN)))
}

/// Trains one model per grid point. A point that fails (too-short panels,
/// divergence, invalid combination) is recorded with its error and the
/// search continues.
pub fn grid_search(
    space: &GridSpace,
    base: &TrainConfig,
    panels: &[AlignedPanel],
    settings: &GridSettings,
) -> Result<GridResult> {
    if !(settings.validation > 0.0 && settings.validation < 1.0) {
        return Err(Error::Parameter(format!("validation fraction must lie in (0, 1), got {}", settings.validation)));
    }
    let points = space.points(base);
    let outcomes = parallel::map_indices(points.len(), |i| match run_point(panels, settings, &points[i]) {
        Ok((metrics, final_loss)) => GridOutcome::Ok { metrics, final_loss },
        Err(err) => {
            log::warn!("grid point {i} failed: {err}");
            GridOutcome::Failed { error: err.to_string() }
        }
    });
    let mut leaderboard: Vec<GridEntry> = points
        .into_iter()
        .zip(outcomes)
        .enumerate()
        .map(|(index, (config, outcome))| GridEntry { index, config, outcome })
        .collect();
    leaderboard.sort_by(|a, b| match (a.metrics(), b.metrics()) {
        (Some(x), Some(y)) => x
            .mape
            .total_cmp(&y.mape)
            .then(x.rmse.total_cmp(&y.rmse))
            .then(a.index.cmp(&b.index)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.index.cmp(&b.index),
    });
    let best = leaderboard
        .first()
        .filter(|e| e.metrics().is_some())
        .ok_or_else(|| Error::Config("every grid point failed".into()))?;
    Ok(GridResult {
        best: best.config.clone(),
        best_index: best.index,
        leaderboard,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_counts() {
        let base = TrainConfig::default();
        assert_eq!(GridSpace::default().points(&base), vec![base.clone()]);
        let s = GridSpace {
            lookback: vec![5, 15],
            hidden_size: vec![16],
            ..GridSpace::default()
        };
        let pts = s.points(&base);
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].lookback, 5);
        assert_eq!(pts[1].hidden_size, 16);
        assert_eq!(GridSpace::tft_full().points(&base).len(), 3 * 4 * 2 * 2 * 2 * 4 * 3 * 2 * 3 * 4);
        assert_eq!(GridSpace::nlinear_full().points(&base).len(), 36);
    }
}
