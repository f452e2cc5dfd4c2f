use serde::{Deserialize, Serialize};

use super::loss::{LossKind, DMSE_ALPHA};
use crate::error::{Error, Result};
use crate::nn::{FeedForwardKind, NormType, Optimizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub hidden_size: usize,
    pub lstm_layers: usize,
    pub n_heads: usize,
    pub feed_forward: FeedForwardKind,
    pub dropout: f64,
    pub hidden_continuous_size: usize,
    pub norm_type: NormType,
    pub optimizer: Optimizer,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub dmse_alpha: f64,
    /// NLinear only: start every weight at `1 / lookback`.
    pub const_init: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lookback: 15,
            horizon: 3,
            hidden_size: 64,
            lstm_layers: 1,
            n_heads: 4,
            feed_forward: FeedForwardKind::SwiGlu,
            dropout: 0.25,
            hidden_continuous_size: 32,
            norm_type: NormType::RmsNorm,
            optimizer: Optimizer::adam(),
            batch_size: 32,
            learning_rate: 1e-3,
            epochs: 200,
            seed: 0,
            loss: LossKind::Dmse,
            dmse_alpha: DMSE_ALPHA,
            const_init: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lookback", self.lookback),
            ("horizon", self.horizon),
            ("hidden_size", self.hidden_size),
            ("lstm_layers", self.lstm_layers),
            ("n_heads", self.n_heads),
            ("hidden_continuous_size", self.hidden_continuous_size),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.hidden_size % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "hidden_size {} is not divisible by n_heads {}",
                self.hidden_size, self.n_heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.dmse_alpha >= 1.0 && self.dmse_alpha.is_finite()) {
            return Err(Error::Config(format!("dmse_alpha must be at least 1, got {}", self.dmse_alpha)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        assert_eq!((c.lookback, c.horizon, c.hidden_size, c.n_heads), (15, 3, 64, 4));
    }

    #[test]
    fn rejects_bad_heads() {
        let c = TrainConfig {
            hidden_size: 30,
            ..TrainConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: TrainConfig = serde_json::from_str(r#"{"hidden_size": 16, "n_heads": 2}"#).unwrap();
        assert_eq!(c.hidden_size, 16);
        assert_eq!(c.lookback, 15);
    }
}
