//! Versioned JSON checkpoints. Floats are written in shortest round-trip
//! decimal form and parsed back exactly, so a load reproduces every tensor
//! bit for bit.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{FeatureSet, Forecaster, ModelKind, Normalizer, TrainConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    /// Row-major.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub model_type: ModelKind,
    pub feature_set: FeatureSet,
    pub n_companies: usize,
    pub config: TrainConfig,
    pub normalizer: Normalizer,
    pub tensors: Vec<TensorRecord>,
}

impl ModelCheckpoint {
    pub fn from_model(model: &Forecaster, normalizer: &Normalizer) -> Result<Self> {
        let tensors = model
            .store
            .iter()
            .map(|p| {
                if !p.value.is_finite() {
                    return Err(Error::Domain(format!("parameter `{}` is not finite", p.name)));
                }
                Ok(TensorRecord {
                    name: p.name.clone(),
                    shape: p.value.shape().to_vec(),
                    values: p.value.data().to_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            format_version: CHECKPOINT_VERSION,
            model_type: model.kind,
            feature_set: model.feature_set,
            n_companies: model.n_companies,
            config: model.config.clone(),
            normalizer: normalizer.clone(),
            tensors,
        })
    }

    /// Rebuilds the model from its config and checks every tensor against
    /// the implied layout.
    pub fn to_model(&self) -> Result<Forecaster> {
        let mut model = Forecaster::new(self.model_type, self.feature_set, self.n_companies, self.config.clone())
            .map_err(|e| Error::Corruption(format!("stored config is unusable: {e}")))?;
        if self.normalizer.n_companies() != self.n_companies {
            return Err(Error::Corruption(format!(
                "normalizer covers {} companies, model {}",
                self.normalizer.n_companies(),
                self.n_companies
            )));
        }
        let mut by_name: HashMap<&str, &TensorRecord> = HashMap::with_capacity(self.tensors.len());
        for t in &self.tensors {
            if by_name.insert(t.name.as_str(), t).is_some() {
                return Err(Error::Corruption(format!("tensor `{}` appears twice", t.name)));
            }
        }
        if by_name.len() != model.store.len() {
            return Err(Error::Corruption(format!(
                "checkpoint holds {} tensors, config implies {}",
                by_name.len(),
                model.store.len()
            )));
        }
        for p in model.store.iter_mut() {
            let t = by_name
                .get(p.name.as_str())
                .ok_or_else(|| Error::Corruption(format!("tensor `{}` missing", p.name)))?;
            if t.shape != p.value.shape() || t.values.len() != p.value.len() {
                return Err(Error::Corruption(format!(
                    "tensor `{}` has shape {:?} with {} values, config implies {:?}",
                    p.name,
                    t.shape,
                    t.values.len(),
                    p.value.shape()
                )));
            }
            p.value.data_mut().copy_from_slice(&t.values);
        }
        Ok(model)
    }
}

pub fn checkpoint_to_string(ckpt: &ModelCheckpoint) -> Result<String> {
    serde_json::to_string_pretty(ckpt).map_err(|e| Error::Corruption(format!("cannot encode checkpoint: {e}")))
}

pub fn checkpoint_from_str(text: &str) -> Result<ModelCheckpoint> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Corruption(format!("checkpoint does not parse: {e}")))?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Corruption("checkpoint has no format_version".into()))?;
    if version != u64::from(CHECKPOINT_VERSION) {
        return Err(Error::UnsupportedVersion(u32::try_from(version).unwrap_or(u32::MAX)));
    }
    serde_json::from_value(value).map_err(|e| Error::Corruption(format!("checkpoint fields invalid: {e}")))
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn save_checkpoint(model: &Forecaster, normalizer: &Normalizer, path: &Path) -> Result<()> {
    let ckpt = ModelCheckpoint::from_model(model, normalizer)?;
    write_atomic(path, checkpoint_to_string(&ckpt)?.as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<ModelCheckpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_windows, train_model};
    use crate::synthetic;

    fn trained() -> (Forecaster, Normalizer, Vec<crate::models::WindowSample>) {
        let panels = vec![synthetic::trend_panel("A", 40, 1.0, 0.3, 1), synthetic::trend_panel("B", 40, 2.0, 0.3, 2)];
        let set = build_windows(&panels, FeatureSet::Hlovs, 6, 2, 0.8).unwrap();
        let cfg = TrainConfig {
            lookback: 6,
            horizon: 2,
            hidden_size: 8,
            n_heads: 2,
            hidden_continuous_size: 4,
            epochs: 1,
            batch_size: 16,
            seed: 9,
            ..TrainConfig::default()
        };
        let mut m = Forecaster::new(ModelKind::TftLite, FeatureSet::Hlovs, 2, cfg).unwrap();
        train_model(&mut m, &set.train).unwrap();
        (m, set.normalizer, set.test)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (m, norm, test) = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_checkpoint(&m, &norm, &path).unwrap();
        let ck = load_checkpoint(&path).unwrap();
        assert_eq!(ck.normalizer, norm);
        let back = ck.to_model().unwrap();
        for (a, b) in m.store.iter().zip(back.store.iter()) {
            let bits = |t: &crate::nn::Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.value), bits(&b.value), "{}", a.name);
        }
        let p0 = m.predict(&test[0]).unwrap();
        let p1 = back.predict(&test[0]).unwrap();
        assert_eq!(p0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), p1.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn truncated_file_is_corruption() {
        let (m, norm, _) = trained();
        let text = checkpoint_to_string(&ModelCheckpoint::from_model(&m, &norm).unwrap()).unwrap();
        let cut = &text[..text.len() / 2];
        assert!(matches!(checkpoint_from_str(cut), Err(Error::Corruption(_))));
    }

    #[test]
    fn other_version_is_rejected() {
        let (m, norm, _) = trained();
        let mut ck = ModelCheckpoint::from_model(&m, &norm).unwrap();
        ck.format_version = 2;
        let text = checkpoint_to_string(&ck).unwrap();
        assert!(matches!(checkpoint_from_str(&text), Err(Error::UnsupportedVersion(2))));
    }

    #[test]
    fn shape_mismatch_is_corruption() {
        let (m, norm, _) = trained();
        let mut ck = ModelCheckpoint::from_model(&m, &norm).unwrap();
        ck.tensors[0].shape.push(1);
        assert!(matches!(ck.to_model(), Err(Error::Corruption(_))));
        let mut ck = ModelCheckpoint::from_model(&m, &norm).unwrap();
        ck.tensors.pop();
        assert!(matches!(ck.to_model(), Err(Error::Corruption(_))));
    }
}
