use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    /// Adam with decoupled weight decay.
    AdamW { beta1: f64, beta2: f64, eps: f64, weight_decay: f64 },
    Adagrad { eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam()
    }
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn adamw() -> Self {
        Optimizer::AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
        }
    }

    pub fn adagrad() -> Self {
        Optimizer::Adagrad { eps: 1e-10 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Optimizer::Adam { .. } => "adam",
            Optimizer::AdamW { .. } => "adamw",
            Optimizer::Adagrad { .. } => "adagrad",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "adam" => Some(Self::adam()),
            "adamw" => Some(Self::adamw()),
            "adagrad" => Some(Self::adagrad()),
            _ => None,
        }
    }

    /// Applies one update from the gradients stored on each parameter.
    /// Nothing is modified if any gradient is non-finite.
    pub fn step(&self, params: &mut ParamStore, lr: f64) -> Result<()> {
        if !(lr > 0.0) {
            return Err(Error::Parameter(format!("learning rate must be positive, got {lr}")));
        }
        if let Some(p) = params.iter().find(|p| !p.grad.is_finite()) {
            return Err(Error::NonFiniteGradient(p.name.clone()));
        }
        match *self {
            Optimizer::Adam { beta1, beta2, eps } => adam_step(params, lr, beta1, beta2, eps, 0.0),
            Optimizer::AdamW {
                beta1,
                beta2,
                eps,
                weight_decay,
            } => adam_step(params, lr, beta1, beta2, eps, weight_decay),
            Optimizer::Adagrad { eps } => {
                for p in params.iter_mut() {
                    p.step += 1;
                    let (value, grad, acc) = (p.value.data_mut(), p.grad.data(), p.v.data_mut());
                    for ((w, g), a) in value.iter_mut().zip(grad).zip(acc.iter_mut()) {
                        *a += g * g;
                        *w -= lr * g / (a.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

fn adam_step(params: &mut ParamStore, lr: f64, beta1: f64, beta2: f64, eps: f64, weight_decay: f64) {
    for p in params.iter_mut() {
        p.step += 1;
        let t = p.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let grad = p.grad.data();
        let (m, v) = (p.m.data_mut(), p.v.data_mut());
        let value = p.value.data_mut();
        for i in 0..grad.len() {
            let g = grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            if weight_decay > 0.0 {
                value[i] -= lr * weight_decay * value[i];
            }
            value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}
