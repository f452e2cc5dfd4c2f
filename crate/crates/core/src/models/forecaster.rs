use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::features::FeatureSet;
use super::nlinear::NLinear;
use super::tft::{TftLite, TftLiteConfig};
use super::windows::{Normalizer, WindowSample};
use crate::error::{Error, Result};
use crate::nn::{Graph, ParamStore, Var};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[serde(rename = "nlinear")]
    NLinear,
    TftLite,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::NLinear => "nlinear",
            ModelKind::TftLite => "tft_lite",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "nlinear" => Ok(ModelKind::NLinear),
            "tft_lite" | "tft" => Ok(ModelKind::TftLite),
            other => Err(Error::Config(format!("unknown model `{other}` (expected nlinear or tft_lite)"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Architecture {
    NLinear(NLinear),
    TftLite(Box<TftLite>),
}

/// A trainable model together with its parameters and the settings that
/// fix its shapes.
#[derive(Debug, Clone)]
pub struct Forecaster {
    pub kind: ModelKind,
    pub feature_set: FeatureSet,
    pub n_companies: usize,
    pub config: TrainConfig,
    pub store: ParamStore,
    arch: Architecture,
}

impl Forecaster {
    /// Initialises parameters from `config.seed`.
    pub fn new(kind: ModelKind, feature_set: FeatureSet, n_companies: usize, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let arch = match kind {
            ModelKind::NLinear => Architecture::NLinear(NLinear::new(
                &mut store,
                config.lookback,
                config.horizon,
                config.const_init,
                &mut rng,
            )),
            ModelKind::TftLite => Architecture::TftLite(Box::new(TftLite::new(
                &mut store,
                TftLiteConfig {
                    n_companies,
                    n_features: feature_set.n_features(),
                    lookback: config.lookback,
                    horizon: config.horizon,
                    hidden: config.hidden_size,
                    lstm_layers: config.lstm_layers,
                    n_heads: config.n_heads,
                    feed_forward: config.feed_forward,
                    dropout: config.dropout,
                    hidden_continuous: config.hidden_continuous_size,
                    norm: config.norm_type,
                },
                &mut rng,
            )?)),
        };
        Ok(Self {
            kind,
            feature_set,
            n_companies,
            config,
            store,
            arch,
        })
    }

    /// Records the forward pass against `store` (which must share this
    /// model's layout).
    pub fn forward_with(&self, g: &mut Graph, sample: &WindowSample) -> Result<Var> {
        match &self.arch {
            Architecture::NLinear(m) => {
                let x = g.input_vector(sample.close_history());
                m.forward(g, x)
            }
            Architecture::TftLite(m) => m.forward(g, sample),
        }
    }

    /// Evaluation-mode forecast in normalized units.
    pub fn predict(&self, sample: &WindowSample) -> Result<Vec<f64>> {
        let mut g = Graph::new(&self.store);
        let y = self.forward_with(&mut g, sample)?;
        let out = g.value(y).data().to_vec();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite forecast for company {}", sample.company)));
        }
        Ok(out)
    }
}

/// Persistence baseline: the last observed value, `horizon` times.
pub fn naive_seasonal_forecast(history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let last = history
        .last()
        .ok_or_else(|| Error::Parameter("naive forecast needs a nonempty history".into()))?;
    Ok(vec![*last; horizon])
}

/// One window's forecast in price units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub company: usize,
    pub target_start: usize,
    pub truth: Vec<f64>,
    pub pred: Vec<f64>,
}

fn denormalize(normalizer: &Normalizer, company: usize, v: &[f64]) -> Vec<f64> {
    v.iter().map(|z| normalizer.denormalize_close(company, *z)).collect()
}

/// Model forecasts for every window, denormalized, in window order.
pub fn forecast_windows(model: &Forecaster, windows: &[WindowSample], normalizer: &Normalizer) -> Result<Vec<Forecast>> {
    parallel::map_slice(windows, |w| {
        let pred = model.predict(w)?;
        Ok(Forecast {
            company: w.company,
            target_start: w.target_start,
            truth: denormalize(normalizer, w.company, &w.target),
            pred: denormalize(normalizer, w.company, &pred),
        })
    })
    .into_iter()
    .collect()
}

pub fn naive_forecast_windows(windows: &[WindowSample], normalizer: &Normalizer) -> Result<Vec<Forecast>> {
    windows
        .iter()
        .map(|w| {
            let pred = naive_seasonal_forecast(&w.close_history(), w.horizon())?;
            Ok(Forecast {
                company: w.company,
                target_start: w.target_start,
                truth: denormalize(normalizer, w.company, &w.target),
                pred: denormalize(normalizer, w.company, &pred),
            })
        })
        .collect()
}

/// Concatenated `(truth, pred)` over forecasts, optionally for one company.
pub fn pooled(forecasts: &[Forecast], company: Option<usize>) -> (Vec<f64>, Vec<f64>) {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for f in forecasts.iter().filter(|f| company.is_none_or(|c| c == f.company)) {
        truth.extend_from_slice(&f.truth);
        pred.extend_from_slice(&f.pred);
    }
    (truth, pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn naive_examples() {
        assert_eq!(naive_seasonal_forecast(&[1.0, 2.0, 7.5], 3).unwrap(), vec![7.5; 3]);
        assert_eq!(naive_seasonal_forecast(&[4.0], 1).unwrap(), vec![4.0]);
        assert!(matches!(naive_seasonal_forecast(&[], 2), Err(Error::Parameter(_))));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("NLinear".parse::<ModelKind>().unwrap(), ModelKind::NLinear);
        assert_eq!("tft-lite".parse::<ModelKind>().unwrap(), ModelKind::TftLite);
        assert_eq!(serde_json::to_string(&ModelKind::TftLite).unwrap(), "\"tft_lite\"");
        assert_eq!(serde_json::to_string(&ModelKind::NLinear).unwrap(), "\"nlinear\"");
    }

    #[test]
    fn same_seed_same_init() {
        let cfg = TrainConfig {
            hidden_size: 8,
            n_heads: 2,
            hidden_continuous_size: 4,
            ..TrainConfig::default()
        };
        let a = Forecaster::new(ModelKind::TftLite, FeatureSet::Hlovs, 2, cfg.clone()).unwrap();
        let b = Forecaster::new(ModelKind::TftLite, FeatureSet::Hlovs, 2, cfg).unwrap();
        assert_eq!(a.store, b.store);
    }
}
