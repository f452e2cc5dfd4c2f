//! Output-directory layout and atomic writers. Every artifact is written to
//! a temporary sibling and renamed into place, so a failed command never
//! leaves a half-written file behind.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sentcast::checkpoint::write_atomic;
use sentcast::models::{FeatureSet, ModelKind};

use crate::error::{require, CliError, CliResult};

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn clean_tweets(&self) -> PathBuf {
        self.root.join("clean/tweets.csv")
    }

    pub fn filter_stats(&self) -> PathBuf {
        self.root.join("clean/filter_stats.json")
    }

    pub fn daily_text(&self) -> PathBuf {
        self.root.join("features/daily_text.json")
    }

    pub fn panel(&self, ticker: &str) -> PathBuf {
        self.root.join(format!("features/panels/{ticker}.csv"))
    }

    pub fn correlations(&self) -> PathBuf {
        self.root.join("analysis/correlations.json")
    }

    pub fn probe(&self) -> PathBuf {
        self.root.join("analysis/probe.json")
    }

    pub fn returns(&self) -> PathBuf {
        self.root.join("analysis/returns.json")
    }

    pub fn returns_histogram(&self) -> PathBuf {
        self.root.join("analysis/returns_histogram.csv")
    }

    fn run_stem(kind: ModelKind, fs: FeatureSet) -> String {
        format!("{}_{}", kind.name(), fs.label())
    }

    pub fn checkpoint(&self, kind: ModelKind, fs: FeatureSet) -> PathBuf {
        self.root.join(format!("models/{}.json", Self::run_stem(kind, fs)))
    }

    pub fn loss_curve(&self, kind: ModelKind, fs: FeatureSet) -> PathBuf {
        self.root.join(format!("models/{}_loss.csv", Self::run_stem(kind, fs)))
    }

    pub fn predictions(&self, kind: ModelKind, fs: FeatureSet) -> PathBuf {
        self.root.join(format!("predictions/{}.csv", Self::run_stem(kind, fs)))
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("evaluation/metrics.json")
    }

    pub fn ranking(&self) -> PathBuf {
        self.root.join("evaluation/ranking.json")
    }

    pub fn leaderboard(&self) -> PathBuf {
        self.root.join("grid/leaderboard.csv")
    }

    pub fn best_config(&self) -> PathBuf {
        self.root.join("grid/best_config.json")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).context("encoding JSON")?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

/// Reads an artifact, failing with exit 2 when it is absent.
pub fn read_json<T: DeserializeOwned>(path: &Path, hint: &str) -> CliResult<T> {
    require(path, hint)?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

/// Serializes rows with a header into a CSV artifact.
pub fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).context("encoding CSV row")?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("flushing CSV: {e}"))?;
    write_atomic(path, &bytes)?;
    Ok(())
}

/// Runs a path-based writer against a temporary sibling, then renames it
/// over `path`.
pub fn write_with<F>(path: &Path, f: F) -> CliResult<()>
where
    F: FnOnce(&Path) -> sentcast::Result<()>,
{
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    if let Err(e) = f(&tmp) {
        let _ = std::fs::remove_file(&tmp);
        return Err(e.into());
    }
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}
