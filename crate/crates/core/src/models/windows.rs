//! Sliding windows over aligned panels with per-company z-scoring.

use serde::{Deserialize, Serialize};

use super::features::{known_future_row, FeatureSet, CLOSE_INDEX, KNOWN_FUTURE_WIDTH};
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::text::AlignedPanel;

#[derive(Debug, Clone, PartialEq)]
pub struct WindowSample {
    pub company: usize,
    /// Panel row index of the first target day.
    pub target_start: usize,
    /// `[lookback, n_features]`, normalized.
    pub past: Tensor,
    /// `[horizon, KNOWN_FUTURE_WIDTH]`.
    pub known_future: Tensor,
    /// Normalized close over the horizon.
    pub target: Vec<f64>,
    /// Normalized close of the last lookback day.
    pub anchor: f64,
}

impl WindowSample {
    pub fn lookback(&self) -> usize {
        self.past.rows()
    }

    pub fn horizon(&self) -> usize {
        self.target.len()
    }

    pub fn close_history(&self) -> Vec<f64> {
        (0..self.past.rows()).map(|r| self.past.at(r, CLOSE_INDEX)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: f64,
    pub std: f64,
}

/// Mean and standard deviation per (company, feature), fitted on the
/// training rows of each company.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub tickers: Vec<String>,
    pub features: Vec<String>,
    /// Number of leading rows per company the statistics were fitted on.
    pub fitted_rows: Vec<usize>,
    pub stats: Vec<Vec<FeatureStats>>,
}

impl Normalizer {
    /// Fits on the first `split_index(T, split)` rows of every panel.
    pub fn fit(panels: &[AlignedPanel], spec: FeatureSet, split: f64) -> Result<Self> {
        check_split(split)?;
        let mut stats = Vec::with_capacity(panels.len());
        let mut fitted_rows = Vec::with_capacity(panels.len());
        for panel in panels {
            let n = split_index(panel.len(), split);
            if n == 0 {
                return Err(Error::Sizing {
                    ticker: panel.ticker.clone(),
                    len: panel.len(),
                    needed: (1.0 / split).ceil() as usize,
                });
            }
            let rows = panel.rows[..n].iter().map(|r| spec.extract(r)).collect::<Result<Vec<_>>>()?;
            stats.push(column_stats(&rows, spec.n_features()));
            fitted_rows.push(n);
        }
        Ok(Self {
            tickers: panels.iter().map(|p| p.ticker.clone()).collect(),
            features: spec.column_names(),
            fitted_rows,
            stats,
        })
    }

    pub fn n_companies(&self) -> usize {
        self.tickers.len()
    }

    pub fn company_index(&self, ticker: &str) -> Option<usize> {
        self.tickers.iter().position(|t| t == ticker)
    }

    pub fn normalize(&self, company: usize, feature: usize, x: f64) -> f64 {
        let s = self.stats[company][feature];
        (x - s.mean) / s.std
    }

    pub fn denormalize(&self, company: usize, feature: usize, z: f64) -> f64 {
        let s = self.stats[company][feature];
        z * s.std + s.mean
    }

    pub fn denormalize_close(&self, company: usize, z: f64) -> f64 {
        self.denormalize(company, CLOSE_INDEX, z)
    }
}

fn column_stats(rows: &[Vec<f64>], width: usize) -> Vec<FeatureStats> {
    let n = rows.len() as f64;
    (0..width)
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            FeatureStats {
                mean,
                std: if std > 1e-12 { std } else { 1.0 },
            }
        })
        .collect()
}

fn check_split(split: f64) -> Result<()> {
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::Parameter(format!("split must lie in (0, 1), got {split}")));
    }
    Ok(())
}

/// `⌊split·T⌋`.
pub fn split_index(len: usize, split: f64) -> usize {
    (split * len as f64).floor() as usize
}

/// `T − L − h + 1` when positive.
pub fn window_count(len: usize, lookback: usize, horizon: usize) -> usize {
    (len + 1).saturating_sub(lookback + horizon)
}

fn check_sizes(panel: &AlignedPanel, lookback: usize, horizon: usize) -> Result<()> {
    if lookback == 0 || horizon == 0 {
        return Err(Error::Parameter("lookback and horizon must be at least 1".into()));
    }
    if panel.len() < lookback + horizon {
        return Err(Error::Sizing {
            ticker: panel.ticker.clone(),
            len: panel.len(),
            needed: lookback + horizon,
        });
    }
    Ok(())
}

/// Every stride-1 window of one panel, normalized with `normalizer`'s
/// statistics for `company`.
pub fn slide_windows(
    panel: &AlignedPanel,
    company: usize,
    spec: FeatureSet,
    lookback: usize,
    horizon: usize,
    normalizer: &Normalizer,
) -> Result<Vec<WindowSample>> {
    check_sizes(panel, lookback, horizon)?;
    let f = spec.n_features();
    let mut normalized = Vec::with_capacity(panel.len() * f);
    for row in &panel.rows {
        let raw = spec.extract(row)?;
        for (j, x) in raw.into_iter().enumerate() {
            let z = normalizer.normalize(company, j, x);
            if !z.is_finite() {
                return Err(Error::validation(
                    spec.column_names()[j].clone(),
                    format!("{} {}: non-finite value", panel.ticker, row.date),
                ));
            }
            normalized.push(z);
        }
    }
    let known: Vec<[f64; KNOWN_FUTURE_WIDTH]> = panel.rows.iter().map(known_future_row).collect();

    let count = window_count(panel.len(), lookback, horizon);
    let mut out = Vec::with_capacity(count);
    for s in 0..count {
        let t0 = s + lookback;
        let past = Tensor::matrix(lookback, f, normalized[s * f..t0 * f].to_vec())?;
        let kf: Vec<f64> = known[t0..t0 + horizon].iter().flatten().copied().collect();
        let known_future = Tensor::matrix(horizon, KNOWN_FUTURE_WIDTH, kf)?;
        let target = (t0..t0 + horizon).map(|r| normalized[r * f + CLOSE_INDEX]).collect();
        out.push(WindowSample {
            company,
            target_start: t0,
            anchor: normalized[(t0 - 1) * f + CLOSE_INDEX],
            past,
            known_future,
            target,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct WindowSet {
    pub train: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
    pub normalizer: Normalizer,
}

/// Chronological split of every panel at `⌊split·T⌋`. Training windows lie
/// entirely before the split; test windows have every target at or after it
/// but may take their lookback from training rows. Windows of all companies
/// are pooled, tagged with their panel index.
pub fn build_windows(
    panels: &[AlignedPanel],
    spec: FeatureSet,
    lookback: usize,
    horizon: usize,
    split: f64,
) -> Result<WindowSet> {
    check_split(split)?;
    for p in panels {
        check_sizes(p, lookback, horizon)?;
    }
    let normalizer = Normalizer::fit(panels, spec, split)?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, panel) in panels.iter().enumerate() {
        let cut = normalizer.fitted_rows[c];
        for w in slide_windows(panel, c, spec, lookback, horizon, &normalizer)? {
            if w.target_start + horizon <= cut {
                train.push(w);
            } else if w.target_start >= cut {
                test.push(w);
            }
        }
    }
    Ok(WindowSet { train, test, normalizer })
}
