//! Directional MSE and plain MSE, as numbers and as graph nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Graph, Tensor, Var};

/// Penalty multiplier for steps whose predicted direction disagrees with the
/// realised one.
pub const DMSE_ALPHA: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Dmse,
    Mse,
}

impl LossKind {
    pub fn from_name(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "dmse" => Some(LossKind::Dmse),
            "mse" => Some(LossKind::Mse),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Dmse => "dmse",
            LossKind::Mse => "mse",
        }
    }
}

fn check(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "prediction has {} steps, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Shape("loss needs at least one step".into()));
    }
    Ok(())
}

/// Per-step weights: 1 when `(x_i − x_{i−1})(y_i − y_{i−1}) ≥ 0`, else
/// `alpha`, with `x_0 = y_0 = anchor`.
pub fn direction_weights(pred: &[f64], truth: &[f64], anchor: f64, alpha: f64) -> Vec<f64> {
    let mut prev_x = anchor;
    let mut prev_y = anchor;
    pred.iter()
        .zip(truth)
        .map(|(&y, &x)| {
            let agree = (x - prev_x) * (y - prev_y) >= 0.0;
            prev_x = x;
            prev_y = y;
            if agree {
                1.0
            } else {
                alpha
            }
        })
        .collect()
}

pub fn dmse_loss(pred: &[f64], truth: &[f64], anchor: f64) -> Result<f64> {
    dmse_loss_with_alpha(pred, truth, anchor, DMSE_ALPHA)
}

pub fn dmse_loss_with_alpha(pred: &[f64], truth: &[f64], anchor: f64, alpha: f64) -> Result<f64> {
    check(pred, truth)?;
    let w = direction_weights(pred, truth, anchor, alpha);
    let total: f64 = pred.iter().zip(truth).zip(&w).map(|((y, x), a)| a * (x - y).powi(2)).sum();
    Ok(total / pred.len() as f64)
}

pub fn mse_loss(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(y, x)| (x - y).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// Records the loss of `pred` against `truth`. The direction weights are
/// read off the current prediction and held constant, so the gradient is
/// that of a weighted MSE (exact away from the sign boundaries).
pub fn loss_node(g: &mut Graph, pred: Var, truth: &[f64], anchor: f64, kind: LossKind, alpha: f64) -> Result<Var> {
    let p = g.value(pred).data().to_vec();
    check(&p, truth)?;
    let t = g.input(Tensor::vector(truth.to_vec()));
    let diff = g.sub(pred, t);
    let sq = g.mul(diff, diff);
    let weighted = match kind {
        LossKind::Mse => sq,
        LossKind::Dmse => {
            let w = g.input(Tensor::vector(direction_weights(&p, truth, anchor, alpha)));
            g.mul(sq, w)
        }
    };
    Ok(g.mean(weighted))
}
