//! Central-difference verification of analytic gradients.

use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::params::{ParamId, ParamStore};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Denominator floor as a fraction of the largest analytic gradient entry.
/// Central differences carry round-off of order `ε·|f|/δ`; coordinates far
/// below the gradient's own scale are judged against that scale instead of
/// against their own (unresolvable) magnitude.
pub const SCALE_FLOOR: f64 = 1e-4;

/// Compares the backward pass of `f` against
/// `(f(θ + δ) − f(θ − δ)) / 2δ` for every coordinate of every parameter.
/// Relative error is `|a − n| / max(|a|, |n|, SCALE_FLOOR·max_k |a_k|, 1e-8)`.
pub fn gradcheck<F>(store: &ParamStore, f: F, delta: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<Var> + Sync + Send,
{
    let analytic = {
        let mut g = Graph::new(store);
        let out = f(&mut g)?;
        g.backward(out)
    };
    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new(s);
        let out = f(&mut g)?;
        Ok(g.scalar(out))
    };

    let coords: Vec<(usize, usize)> = (0..store.len())
        .flat_map(|pi| (0..store.get(ParamId(pi)).value.len()).map(move |k| (pi, k)))
        .collect();
    let numeric = crate::parallel::map_slice(&coords, |&(pi, k)| -> Result<f64> {
        let id = ParamId(pi);
        let mut probe = store.clone();
        let orig = store.get(id).value.data()[k];
        probe.get_mut(id).value.data_mut()[k] = orig + delta;
        let plus = eval(&probe)?;
        probe.get_mut(id).value.data_mut()[k] = orig - delta;
        let minus = eval(&probe)?;
        Ok((plus - minus) / (2.0 * delta))
    });

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
        tolerance: tol,
        passed: true,
    };
    let analytic_at = |pi: usize, k: usize| analytic.get(ParamId(pi)).map_or(0.0, |g| g.data()[k]);
    let scale = coords.iter().map(|&(pi, k)| analytic_at(pi, k).abs()).fold(0.0, f64::max);
    let floor = (SCALE_FLOOR * scale).max(1e-8);
    for (&(pi, k), numeric) in coords.iter().zip(numeric) {
        let numeric = numeric?;
        let a = analytic_at(pi, k);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        report.checked += 1;
        if report.worst.is_none() || rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst = Some((store.get(ParamId(pi)).name.clone(), k));
        }
    }
    report.passed = report.max_rel_error < tol;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    #[test]
    fn quadratic_is_exact() {
        let mut store = ParamStore::new();
        let id = store.add("theta", Tensor::vector(vec![0.3, -1.2, 2.5, 0.0]));
        let report = gradcheck(
            &store,
            |g| {
                let t = g.param(id);
                let sq = g.mul(t, t);
                Ok(g.sum(sq))
            },
            1e-5,
            1e-9,
        )
        .unwrap();
        assert_eq!(report.checked, 4);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        // relu at exactly 0 has a kink: analytic 0, numeric 0.5.
        let mut store = ParamStore::new();
        let id = store.add("x", Tensor::vector(vec![0.0]));
        let report = gradcheck(
            &store,
            |g| {
                let t = g.param(id);
                let r = g.relu(t);
                Ok(g.sum(r))
            },
            1e-5,
            1e-4,
        )
        .unwrap();
        assert!(!report.passed);
        assert_eq!(report.worst, Some(("x".to_string(), 0)));
    }
}
