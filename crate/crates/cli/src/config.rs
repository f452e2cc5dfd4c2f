//! Run configuration: a flat `key = value` file with dotted section keys
//! (TOML syntax), plus command-line overrides.
//!
//! ```text
//! seed = 7
//! tickers = ["AAA", "BBB"]
//! paths.ohlcv_dir = "ohlcv"
//! paths.tweets = "tweets.csv"
//! paths.output = "out"
//! model.runs = ["tft_lite:HLOVS", "nlinear:HLOV"]
//! train.lookback = 15
//! grid.lookback = [5, 15]
//! ```
//!
//! Relative paths are resolved against the config file's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use sentcast::models::{FeatureSet, GridSpace, ModelKind, TrainConfig};
use sentcast::nn::{FeedForwardKind, NormType, Optimizer};
use sentcast::models::LossKind;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    tickers: Vec<String>,
    #[serde(default)]
    paths: PathsSection,
    #[serde(default)]
    features: FeaturesSection,
    #[serde(default)]
    analysis: AnalysisSection,
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    train: toml::Table,
    #[serde(default)]
    grid: toml::Table,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathsSection {
    ohlcv_dir: Option<PathBuf>,
    tweets: Option<PathBuf>,
    embeddings: Option<PathBuf>,
    holidays: Option<PathBuf>,
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesSection {
    /// EWMA span for the sentiment score and smoothed volume.
    pub smoothing_span: usize,
    pub atr_period: usize,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        Self {
            smoothing_span: 15,
            atr_period: 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub correlations: bool,
    pub probe: bool,
    pub histogram_bins: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            correlations: true,
            probe: true,
            histogram_bins: 30,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ModelSection {
    runs: Vec<String>,
    test_split: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            runs: vec!["tft_lite:HLOVS".into()],
            test_split: 0.8,
        }
    }
}

/// One model to train and evaluate. The feature set is kept by name until
/// panels are loaded, because HLOVE takes its width from the data.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Run {
    pub kind: ModelKind,
    pub feature_set: String,
}

impl Run {
    pub fn parse(s: &str) -> CliResult<Self> {
        let (kind, fs) = s
            .split_once(':')
            .ok_or_else(|| CliError::validation(format!("model run `{s}` must look like `tft_lite:HLOVS`")))?;
        let kind: ModelKind = kind.parse()?;
        let feature_set = fs.trim().to_ascii_uppercase();
        FeatureSet::parse_with_dim(&feature_set, 0)?;
        Ok(Self { kind, feature_set })
    }

    pub fn resolve(&self, embedding_dim: usize) -> CliResult<FeatureSet> {
        let fs = FeatureSet::parse_with_dim(&self.feature_set, embedding_dim)?;
        if matches!(fs, FeatureSet::Hlove { dim: 0 }) {
            return Err(CliError::validation(format!(
                "{}:{} needs embeddings, but the panels carry none",
                self.kind, self.feature_set
            )));
        }
        Ok(fs)
    }
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub space: GridSpace,
    pub validation: f64,
    pub run: Option<Run>,
}

#[derive(Debug, Clone)]
pub struct Paths {
    pub ohlcv_dir: PathBuf,
    pub tweets: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub holidays: Option<PathBuf>,
    pub output: PathBuf,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub tickers: Vec<String>,
    pub paths: Paths,
    pub features: FeaturesSection,
    pub analysis: AnalysisSection,
    pub runs: Vec<Run>,
    pub test_split: f64,
    /// `seed` is copied in from the top-level key.
    pub train: TrainConfig,
    pub grid: GridConfig,
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_ascii_lowercase().replace('-', "_")))
        .map_err(|e| e.to_string())
}

fn parse_feed_forward(s: &str) -> Result<FeedForwardKind, String> {
    parse_enum(s)
}

fn parse_norm(s: &str) -> Result<NormType, String> {
    parse_enum(s)
}

fn parse_optimizer(s: &str) -> Result<Optimizer, String> {
    Optimizer::from_name(s).ok_or_else(|| format!("unknown optimizer `{s}` (adam, adamw, adagrad)"))
}

fn parse_loss(s: &str) -> Result<LossKind, String> {
    LossKind::from_name(s).ok_or_else(|| format!("unknown loss `{s}` (dmse, mse)"))
}

/// Flags shared by every pipeline command. Each overrides the matching
/// config key.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Run configuration file.
    #[arg(long, short = 'c')]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Comma-separated tickers.
    #[arg(long, value_delimiter = ',')]
    pub tickers: Option<Vec<String>>,
    /// Model kind for every configured run (nlinear, tft_lite).
    #[arg(long)]
    pub model: Option<String>,
    /// Feature set for every configured run (HLOV, HLOVS, HLOVE).
    #[arg(long)]
    pub feature_set: Option<String>,
    #[arg(long)]
    pub test_split: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lookback: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub hidden_size: Option<usize>,
    #[arg(long)]
    pub lstm_layers: Option<usize>,
    #[arg(long)]
    pub n_heads: Option<usize>,
    /// swiglu or relu.
    #[arg(long, value_parser = parse_feed_forward)]
    pub feed_forward: Option<FeedForwardKind>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub hidden_continuous_size: Option<usize>,
    /// rms_norm or layer_norm.
    #[arg(long, value_parser = parse_norm)]
    pub norm_type: Option<NormType>,
    #[arg(long, value_parser = parse_optimizer)]
    pub optimizer: Option<Optimizer>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, value_parser = parse_loss)]
    pub loss: Option<LossKind>,
    #[arg(long)]
    pub dmse_alpha: Option<f64>,
    #[arg(long)]
    pub const_init: Option<bool>,
}

/// `train.optimizer = "adam"` is shorthand for the full tagged table.
fn expand_optimizer(v: &mut toml::Value) -> CliResult<()> {
    if let toml::Value::String(name) = v {
        let opt = parse_optimizer(name).map_err(CliError::validation)?;
        *v = toml::Value::try_from(opt).map_err(|e| CliError::validation(e.to_string()))?;
    }
    Ok(())
}

fn known_keys<T: Serialize>(value: &T) -> BTreeSet<String> {
    match toml::Value::try_from(value) {
        Ok(toml::Value::Table(t)) => t.keys().cloned().collect(),
        _ => BTreeSet::new(),
    }
}

fn check_keys(section: &str, table: &toml::Table, known: &BTreeSet<String>) -> CliResult<()> {
    match table.keys().find(|k| !known.contains(*k)) {
        Some(k) => Err(CliError::validation(format!("unknown config key `{section}.{k}`"))),
        None => Ok(()),
    }
}

fn train_from_table(mut table: toml::Table) -> CliResult<TrainConfig> {
    check_keys("train", &table, &known_keys(&TrainConfig::default()))?;
    if table.contains_key("seed") {
        return Err(CliError::validation("set the seed with the top-level `seed` key, not `train.seed`"));
    }
    if let Some(v) = table.get_mut("optimizer") {
        expand_optimizer(v)?;
    }
    TrainConfig::deserialize(toml::Value::Table(table)).map_err(|e| CliError::validation(format!("train: {e}")))
}

fn grid_from_table(mut table: toml::Table) -> CliResult<GridConfig> {
    let preset = table.remove("preset");
    let validation = match table.remove("validation") {
        None => 0.2,
        Some(v) => v
            .as_float()
            .ok_or_else(|| CliError::validation("grid.validation must be a number"))?,
    };
    let run = match table.remove("run") {
        None => None,
        Some(toml::Value::String(s)) => Some(Run::parse(&s)?),
        Some(_) => return Err(CliError::validation("grid.run must be a string like `nlinear:HLOV`")),
    };
    check_keys("grid", &table, &known_keys(&GridSpace::default()))?;
    if let Some(toml::Value::Array(items)) = table.get_mut("optimizer") {
        for v in items.iter_mut() {
            expand_optimizer(v)?;
        }
    }
    let mut space = match preset.as_ref().and_then(|v| v.as_str()) {
        None | Some("none") => GridSpace::default(),
        Some("tft") | Some("tft_lite") => GridSpace::tft_full(),
        Some("nlinear") => GridSpace::nlinear_full(),
        Some(other) => return Err(CliError::validation(format!("unknown grid.preset `{other}` (none, tft, nlinear)"))),
    };
    let explicit =
        GridSpace::deserialize(toml::Value::Table(table.clone())).map_err(|e| CliError::validation(format!("grid: {e}")))?;
    macro_rules! take {
        ($($f:ident),*) => {$(
            if table.contains_key(stringify!($f)) {
                space.$f = explicit.$f;
            }
        )*};
    }
    take!(lookback, hidden_size, lstm_layers, n_heads, feed_forward, dropout, hidden_continuous_size, norm_type, optimizer, batch_size);
    Ok(GridConfig { space, validation, run })
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    pub fn load(overrides: &Overrides) -> CliResult<Self> {
        let path = &overrides.config;
        if !path.is_file() {
            return Err(CliError::missing(path, "config file"));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Internal(e.into()))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let mut cfg = Self::from_toml(&text, base)?;
        cfg.apply(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str, base: &Path) -> CliResult<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| CliError::validation(format!("config: {e}")))?;
        let need = |p: Option<PathBuf>, key: &str| {
            p.map(|p| resolve(base, p))
                .ok_or_else(|| CliError::validation(format!("config key `paths.{key}` is required")))
        };
        let paths = Paths {
            ohlcv_dir: need(file.paths.ohlcv_dir, "ohlcv_dir")?,
            tweets: need(file.paths.tweets, "tweets")?,
            embeddings: file.paths.embeddings.map(|p| resolve(base, p)),
            holidays: file.paths.holidays.map(|p| resolve(base, p)),
            output: need(file.paths.output, "output")?,
        };
        let mut train = train_from_table(file.train)?;
        train.seed = file.seed;
        Ok(Self {
            seed: file.seed,
            tickers: file.tickers,
            paths,
            features: file.features,
            analysis: file.analysis,
            runs: file.model.runs.iter().map(|s| Run::parse(s)).collect::<CliResult<_>>()?,
            test_split: file.model.test_split,
            train,
            grid: grid_from_table(file.grid)?,
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> CliResult<()> {
        if let Some(p) = &o.output {
            self.paths.output = p.clone();
        }
        if let Some(t) = &o.tickers {
            self.tickers = t.clone();
        }
        if let Some(m) = &o.model {
            let kind: ModelKind = m.parse()?;
            self.runs.iter_mut().for_each(|r| r.kind = kind);
        }
        if let Some(fs) = &o.feature_set {
            let fs = Run::parse(&format!("nlinear:{fs}"))?.feature_set;
            self.runs.iter_mut().for_each(|r| r.feature_set = fs.clone());
        }
        self.runs.sort();
        self.runs.dedup();
        if let Some(v) = o.test_split {
            self.test_split = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
            self.train.seed = v;
        }
        let t = &mut self.train;
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = o.$f.clone() {
                    t.$f = v;
                }
            )*};
        }
        set!(
            lookback,
            horizon,
            hidden_size,
            lstm_layers,
            n_heads,
            feed_forward,
            dropout,
            hidden_continuous_size,
            norm_type,
            optimizer,
            batch_size,
            learning_rate,
            epochs,
            loss,
            dmse_alpha,
            const_init
        );
        Ok(())
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.tickers.is_empty() {
            return Err(CliError::validation("no tickers configured"));
        }
        let mut seen = BTreeSet::new();
        for t in &self.tickers {
            if t.is_empty() || !t.chars().all(|c| c.is_ascii_alphanumeric() || c == '.' || c == '-') {
                return Err(CliError::validation(format!("ticker `{t}` is not a plain symbol")));
            }
            if !seen.insert(t) {
                return Err(CliError::validation(format!("ticker `{t}` listed twice")));
            }
        }
        if self.runs.is_empty() {
            return Err(CliError::validation("model.runs is empty"));
        }
        if !(self.test_split > 0.0 && self.test_split < 1.0) {
            return Err(CliError::validation(format!("model.test_split must lie in (0, 1), got {}", self.test_split)));
        }
        if self.features.smoothing_span == 0 || self.features.atr_period == 0 {
            return Err(CliError::validation("features.smoothing_span and features.atr_period must be at least 1"));
        }
        if self.analysis.histogram_bins == 0 {
            return Err(CliError::validation("analysis.histogram_bins must be at least 1"));
        }
        self.train.validate()?;
        Ok(())
    }

    pub fn grid_run(&self) -> &Run {
        self.grid.run.as_ref().unwrap_or(&self.runs[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 3
tickers = ["AAA"]
paths.ohlcv_dir = "ohlcv"
paths.tweets = "tweets.csv"
paths.output = "out"
"#;

    #[test]
    fn defaults_and_relative_paths() {
        let cfg = RunConfig::from_toml(MINIMAL, Path::new("/data")).unwrap();
        assert_eq!(cfg.paths.tweets, Path::new("/data/tweets.csv"));
        assert_eq!(cfg.train.seed, 3);
        assert_eq!(cfg.train.lookback, 15);
        assert_eq!(cfg.runs, vec![Run::parse("tft_lite:HLOVS").unwrap()]);
        assert!(cfg.paths.embeddings.is_none());
    }

    #[test]
    fn dotted_train_and_grid_keys() {
        let text = format!(
            "{MINIMAL}train.lookback = 5\ntrain.optimizer = \"adamw\"\ntrain.feed_forward = \"relu\"\ngrid.preset = \"nlinear\"\ngrid.lookback = [5, 15]\ngrid.norm_type = [\"rmsnorm\", \"layernorm\"]\n"
        );
        let cfg = RunConfig::from_toml(&text, Path::new(".")).unwrap();
        assert_eq!(cfg.train.lookback, 5);
        assert_eq!(cfg.train.optimizer, Optimizer::adamw());
        assert_eq!(cfg.train.feed_forward, FeedForwardKind::Relu);
        assert_eq!(cfg.grid.space.lookback, vec![5, 15]);
        assert_eq!(cfg.grid.space.norm_type, vec![NormType::RmsNorm, NormType::LayerNorm]);
        assert_eq!(cfg.grid.space.batch_size, GridSpace::nlinear_full().batch_size);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for extra in ["train.lookbak = 5", "grid.lookbak = [5]", "paths.other = \"x\"", "train.seed = 1"] {
            let text = format!("{MINIMAL}{extra}\n");
            assert!(matches!(RunConfig::from_toml(&text, Path::new(".")), Err(CliError::Validation(_))), "{extra}");
        }
    }

    #[test]
    fn overrides_win() {
        let mut cfg = RunConfig::from_toml(MINIMAL, Path::new(".")).unwrap();
        let o = Overrides {
            lookback: Some(7),
            seed: Some(9),
            feature_set: Some("hlove".into()),
            model: Some("nlinear".into()),
            feed_forward: Some(FeedForwardKind::Relu),
            ..Overrides::default()
        };
        cfg.apply(&o).unwrap();
        assert_eq!(cfg.train.lookback, 7);
        assert_eq!((cfg.seed, cfg.train.seed), (9, 9));
        assert_eq!(cfg.runs, vec![Run::parse("nlinear:HLOVE").unwrap()]);
        assert_eq!(cfg.train.feed_forward, FeedForwardKind::Relu);
    }

    #[test]
    fn flag_value_parsers() {
        assert_eq!(parse_feed_forward("SwiGLU").unwrap(), FeedForwardKind::SwiGlu);
        assert_eq!(parse_norm("rms-norm").unwrap(), NormType::RmsNorm);
        assert_eq!(parse_norm("LinearNorm").unwrap(), NormType::LayerNorm);
        assert!(parse_optimizer("sgd").is_err());
    }
}
