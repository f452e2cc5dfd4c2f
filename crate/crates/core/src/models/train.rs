//! Minibatch training over pooled multi-company windows.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forecaster::Forecaster;
use super::loss::loss_node;
use super::windows::WindowSample;
use crate::error::{Error, Result};
use crate::nn::{Gradients, Graph};
use crate::parallel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
    pub n_windows: usize,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_curve.last().copied()
    }
}

/// SplitMix64 finaliser; decorrelates derived seeds.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut z: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        z = z.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Loss and gradients of one window in training mode.
fn sample_step(model: &Forecaster, w: &WindowSample, seed: u64) -> Result<(f64, Gradients)> {
    let cfg = &model.config;
    let mut g = Graph::training(&model.store, seed);
    let pred = model.forward_with(&mut g, w)?;
    let loss = loss_node(&mut g, pred, &w.target, w.anchor, cfg.loss, cfg.dmse_alpha)?;
    Ok((g.scalar(loss), g.backward(loss)))
}

/// Mean loss of `model` over `windows` in evaluation mode.
pub fn evaluate_loss(model: &Forecaster, windows: &[WindowSample]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::NoObservations);
    }
    let cfg = &model.config;
    let losses = parallel::map_slice(windows, |w| -> Result<f64> {
        let mut g = Graph::new(&model.store);
        let pred = model.forward_with(&mut g, w)?;
        let l = loss_node(&mut g, pred, &w.target, w.anchor, cfg.loss, cfg.dmse_alpha)?;
        Ok(g.scalar(l))
    });
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / windows.len() as f64)
}

/// Trains `model` in place with its own config. Windows are shuffled each
/// epoch from a stream seeded by `config.seed`; dropout masks are seeded per
/// (epoch, window). Per-window gradients are computed concurrently and summed
/// in batch order, so results do not depend on the thread count.
pub fn train_model(model: &mut Forecaster, train: &[WindowSample]) -> Result<TrainReport> {
    if train.is_empty() {
        return Err(Error::Parameter("training set is empty".into()));
    }
    let cfg = model.config.clone();
    cfg.validate()?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(mix_seed(&[cfg.seed, 0x5348]));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut shuffle_rng);
        let mut epoch_total = 0.0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let diverged = |message: String| Error::Training { epoch, batch, message };
            let model_ref = &*model;
            let results = parallel::map_slice(chunk, |&i| {
                sample_step(model_ref, &train[i], mix_seed(&[cfg.seed, epoch as u64, i as u64]))
            });
            let mut grads = Gradients::empty(model.store.len());
            let mut batch_loss = 0.0;
            for r in results {
                let (l, gr) = r?;
                batch_loss += l;
                grads.accumulate(&gr);
            }
            if !batch_loss.is_finite() {
                return Err(diverged(format!("loss is {batch_loss}")));
            }
            grads.scale(1.0 / chunk.len() as f64);
            model.store.set_grads(&grads)?;
            cfg.optimizer.step(&mut model.store, cfg.learning_rate).map_err(|e| match e {
                Error::NonFiniteGradient(name) => diverged(format!("non-finite gradient in `{name}`")),
                other => other,
            })?;
            epoch_total += batch_loss;
        }
        let mean = epoch_total / train.len() as f64;
        log::debug!("epoch {epoch}: loss {mean:.6}");
        curve.push(mean);
    }
    Ok(TrainReport {
        loss_curve: curve,
        n_windows: train.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_windows, FeatureSet, ModelKind, TrainConfig};
    use crate::synthetic;

    fn small_tft() -> TrainConfig {
        TrainConfig {
            hidden_size: 8,
            n_heads: 2,
            hidden_continuous_size: 4,
            lookback: 6,
            horizon: 2,
            batch_size: 8,
            epochs: 2,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_keeps_init() {
        let p = synthetic::trend_panel("A", 40, 1.0, 0.1, 0);
        let set = build_windows(&[p], FeatureSet::Hlov, 6, 2, 0.8).unwrap();
        let cfg = TrainConfig { epochs: 0, ..small_tft() };
        let mut m = Forecaster::new(ModelKind::TftLite, FeatureSet::Hlov, 1, cfg).unwrap();
        let before = m.store.clone();
        let r = train_model(&mut m, &set.train).unwrap();
        assert!(r.loss_curve.is_empty());
        assert_eq!(m.store, before);
    }

    #[test]
    fn identical_seeds_identical_curves() {
        let p = synthetic::trend_panel("A", 40, 1.0, 0.1, 0);
        let set = build_windows(&[p], FeatureSet::Hlovs, 6, 2, 0.8).unwrap();
        let run = || {
            let mut m = Forecaster::new(ModelKind::TftLite, FeatureSet::Hlovs, 1, small_tft()).unwrap();
            let r = train_model(&mut m, &set.train).unwrap();
            (r.loss_curve, m.store)
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert_eq!(a.len(), 2);
        assert!(a.iter().all(|v| v.is_finite()));
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(sa, sb);
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let mut m = Forecaster::new(ModelKind::NLinear, FeatureSet::Hlov, 1, TrainConfig::default()).unwrap();
        assert!(train_model(&mut m, &[]).is_err());
    }

    #[test]
    fn divergence_reports_epoch_and_batch() {
        let p = synthetic::trend_panel("A", 40, 1.0, 0.1, 0);
        let mut set = build_windows(&[p], FeatureSet::Hlov, 6, 2, 0.8).unwrap();
        set.train[3].target[0] = f64::INFINITY;
        let cfg = TrainConfig {
            lookback: 6,
            horizon: 2,
            batch_size: 4,
            epochs: 3,
            ..TrainConfig::default()
        };
        let mut m = Forecaster::new(ModelKind::NLinear, FeatureSet::Hlov, 1, cfg).unwrap();
        match train_model(&mut m, &set.train) {
            Err(Error::Training { epoch, .. }) => assert_eq!(epoch, 0),
            other => panic!("{other:?}"),
        }
    }
}
