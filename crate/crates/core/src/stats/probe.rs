//! Linear probe: how much of a sentiment series can be read linearly off
//! embedding vectors, compared against random vectors of the same width.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const RIDGE_LAMBDA: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub ticker: String,
    pub r2_embeddings: f64,
    pub r2_random: f64,
    pub n_samples: usize,
    pub dim: usize,
}

impl ProbeResult {
    pub fn well_posed(&self) -> bool {
        self.n_samples > self.dim
    }
}

/// In-sample R² of a ridge-stabilised least-squares fit of `y` on the rows
/// of `x` plus an intercept.
pub fn ols_r2_probe(x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let n = y.len();
    if n < 2 {
        return Err(Error::Parameter("probe needs at least two samples".into()));
    }
    if x.len() != n {
        return Err(Error::Shape(format!("{} feature rows for {n} targets", x.len())));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::Parameter("probe needs at least one feature".into()));
    }
    if let Some(row) = x.iter().find(|r| r.len() != d) {
        return Err(Error::Shape(format!("feature row of width {} in a width-{d} matrix", row.len())));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::validation("probe input", "non-finite entry"));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Domain("probe target is constant".into()));
    }

    let design = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let target = DVector::from_column_slice(y);
    let mut gram = design.transpose() * &design;
    for i in 0..=d {
        gram[(i, i)] += RIDGE_LAMBDA;
    }
    let rhs = design.transpose() * &target;
    let w = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Domain("normal equations are singular".into()))?,
    };
    let resid = &target - design * w;
    let ss_res = resid.norm_squared();
    Ok(1.0 - ss_res / ss_tot)
}

/// Deterministic `n × d` standard-normal matrix.
pub fn random_vector_baseline(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

/// Runs the probe on `embeddings` and on a random baseline of equal shape.
pub fn probe_embeddings(ticker: &str, embeddings: &[Vec<f64>], target: &[f64], seed: u64) -> Result<ProbeResult> {
    let dim = embeddings.first().map_or(0, Vec::len);
    let r2_embeddings = ols_r2_probe(embeddings, target)?;
    let random = random_vector_baseline(target.len(), dim, seed);
    let r2_random = ols_r2_probe(&random, target)?;
    let result = ProbeResult {
        ticker: ticker.to_string(),
        r2_embeddings,
        r2_random,
        n_samples: target.len(),
        dim,
    };
    if !result.well_posed() {
        log::warn!("{ticker}: probe has {} samples for {dim} dimensions; R² is not meaningful", target.len());
    }
    Ok(result)
}
