//! Price-derived series: smoothing, Average True Range, daily returns and
//! min-max scaling.

use serde::{Deserialize, Serialize};

use super::ohlcv::OhlcvBar;
use crate::error::{Error, Result};

/// Three business weeks.
pub const DEFAULT_SMOOTHING_SPAN: usize = 15;

/// Wilder's customary ATR period.
pub const DEFAULT_ATR_PERIOD: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingMethod {
    Ewma,
    RollingMean,
}

/// Output of [`smooth`]. `values[i]` corresponds to input index
/// `offset + i`; the rolling mean skips incomplete leading windows.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub offset: usize,
    pub values: Vec<f64>,
}

pub fn smooth(series: &[f64], method: SmoothingMethod, span: usize) -> Result<Smoothed> {
    if span == 0 {
        return Err(Error::Parameter("smoothing span must be at least 1".into()));
    }
    if series.is_empty() {
        return Err(Error::Parameter("cannot smooth an empty series".into()));
    }
    Ok(match method {
        SmoothingMethod::Ewma => Smoothed {
            offset: 0,
            values: ewma(series, span),
        },
        SmoothingMethod::RollingMean => Smoothed {
            offset: span - 1,
            values: rolling_mean(series, span),
        },
    })
}

/// `s_1 = x_1`, `s_t = a x_t + (1 - a) s_{t-1}` with `a = 2 / (span + 1)`.
pub fn ewma(series: &[f64], span: usize) -> Vec<f64> {
    let alpha = 2.0 / (span as f64 + 1.0);
    let mut out = Vec::with_capacity(series.len());
    let mut state = match series.first() {
        Some(&x) => x,
        None => return out,
    };
    out.push(state);
    for &x in &series[1..] {
        state = alpha * x + (1.0 - alpha) * state;
        out.push(state);
    }
    out
}

pub fn rolling_mean(series: &[f64], span: usize) -> Vec<f64> {
    if span == 0 || series.len() < span {
        return Vec::new();
    }
    series.windows(span).map(|w| w.iter().sum::<f64>() / span as f64).collect()
}

pub fn true_range(bar: &OhlcvBar, prev_close: f64) -> f64 {
    bar.high.max(prev_close) - bar.low.min(prev_close)
}

/// Average True Range, seeded with the first bar's high-low range.
pub fn atr(bars: &[OhlcvBar], n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Parameter("ATR period must be at least 1".into()));
    }
    let first = bars.first().ok_or_else(|| Error::Parameter("ATR of an empty series".into()))?;
    let keep = (n as f64 - 1.0) / n as f64;
    let inv = 1.0 / n as f64;
    let mut out = Vec::with_capacity(bars.len());
    let mut state = first.high - first.low;
    out.push(state);
    for w in bars.windows(2) {
        state = keep * state + inv * true_range(&w[1], w[0].close);
        out.push(state);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub returns: Vec<f64>,
    /// Sum of squared returns (deviations from zero).
    pub sum_sq: f64,
    /// `sqrt(sum_sq)`.
    pub sigma: f64,
}

pub fn daily_returns_sigma(close: &[f64]) -> Result<ReturnStats> {
    if close.len() < 2 {
        return Err(Error::Parameter("need at least two closes".into()));
    }
    if let Some(bad) = close.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
        return Err(Error::Domain(format!("close prices must be positive, got {bad}")));
    }
    let returns: Vec<f64> = close.windows(2).map(|w| (w[1] - w[0]) / w[0]).collect();
    let sum_sq: f64 = returns.iter().map(|r| r * r).sum();
    Ok(ReturnStats {
        returns,
        sum_sq,
        sigma: sum_sq.sqrt(),
    })
}

/// Affine map onto `[0, 1]`; a constant series maps to zeros.
pub fn min_max_scale(series: &[f64]) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::Parameter("cannot scale an empty series".into()));
    }
    let (lo, hi) = series
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let range = hi - lo;
    if range == 0.0 {
        return Ok(vec![0.0; series.len()]);
    }
    Ok(series.iter().map(|x| (x - lo) / range).collect())
}
