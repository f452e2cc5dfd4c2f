//! Forecast error metrics and the composite ranking across models.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::average_ranks;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Percent.
    pub mape: f64,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub r2: f64,
    /// Percent, half-sum denominator.
    pub smape: f64,
}

impl Metrics {
    pub const NAMES: [&'static str; 6] = ["mape", "mae", "mse", "rmse", "r2", "smape"];

    pub fn values(&self) -> [f64; 6] {
        [self.mape, self.mae, self.mse, self.rmse, self.r2, self.smape]
    }
}

pub fn compute_metrics(truth: &[f64], pred: &[f64]) -> Result<Metrics> {
    if truth.len() != pred.len() {
        return Err(Error::Shape(format!("truth has {} values, prediction {}", truth.len(), pred.len())));
    }
    if truth.len() < 2 {
        return Err(Error::Parameter(format!("metrics need at least 2 points, got {}", truth.len())));
    }
    if let Some(i) = truth.iter().chain(pred).position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite value at position {i}")));
    }
    if truth.contains(&0.0) {
        return Err(Error::Domain("MAPE undefined: a truth value is zero".into()));
    }
    if truth.iter().zip(pred).any(|(t, p)| t.abs() + p.abs() == 0.0) {
        return Err(Error::Domain("SMAPE undefined: truth and prediction both zero".into()));
    }
    let n = truth.len() as f64;
    let mean_t = truth.iter().sum::<f64>() / n;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean_t).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Domain("R² undefined: truth is constant".into()));
    }
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut ape = 0.0;
    let mut sape = 0.0;
    for (t, p) in truth.iter().zip(pred) {
        let e = (t - p).abs();
        abs_sum += e;
        sq_sum += e * e;
        ape += e / t.abs();
        sape += e / ((t.abs() + p.abs()) / 2.0);
    }
    let mse = sq_sum / n;
    Ok(Metrics {
        mape: 100.0 * ape / n,
        mae: abs_sum / n,
        mse,
        rmse: mse.sqrt(),
        r2: 1.0 - sq_sum / ss_tot,
        smape: 100.0 * sape / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub ticker: String,
    pub model: String,
    pub feature_set: String,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRecord {
    pub record: MetricsRecord,
    /// Per-metric ranks in [`Metrics::NAMES`] order; ties share the mean rank.
    pub ranks: [f64; 6],
    pub composite: f64,
    /// 1-based final position within the group.
    pub position: usize,
}

/// Ranks one group of records. Error metrics rank ascending and R²
/// descending; the composite is the mean rank. Order is by composite, then
/// MAPE rank, then input order.
pub fn composite_rank(records: &[MetricsRecord]) -> Result<Vec<RankedRecord>> {
    if records.len() < 2 {
        return Err(Error::validation("records", format!("ranking needs at least 2 records, got {}", records.len())));
    }
    for r in records {
        if let Some((name, _)) = Metrics::NAMES.iter().zip(r.metrics.values()).find(|(_, v)| !v.is_finite()) {
            return Err(Error::validation(
                *name,
                format!("{} / {} / {}: metric missing", r.ticker, r.model, r.feature_set),
            ));
        }
    }
    let columns: Vec<Vec<f64>> = (0..6)
        .map(|j| {
            records
                .iter()
                .map(|r| {
                    let v = r.metrics.values()[j];
                    if j == 4 {
                        -v
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    let ranks: Vec<Vec<f64>> = columns.iter().map(|c| average_ranks(c)).collect();
    let mut out: Vec<(usize, RankedRecord)> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let rk: [f64; 6] = std::array::from_fn(|j| ranks[j][i]);
            (
                i,
                RankedRecord {
                    record: r.clone(),
                    ranks: rk,
                    composite: rk.iter().sum::<f64>() / 6.0,
                    position: 0,
                },
            )
        })
        .collect();
    out.sort_by(|(ia, a), (ib, b)| {
        a.composite
            .total_cmp(&b.composite)
            .then(a.ranks[0].total_cmp(&b.ranks[0]))
            .then(ia.cmp(ib))
    });
    Ok(out
        .into_iter()
        .enumerate()
        .map(|(pos, (_, mut r))| {
            r.position = pos + 1;
            r
        })
        .collect())
}

/// [`composite_rank`] per ticker.
pub fn composite_rank_by_ticker(records: &[MetricsRecord]) -> Result<BTreeMap<String, Vec<RankedRecord>>> {
    let mut groups: BTreeMap<String, Vec<MetricsRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.ticker.clone()).or_default().push(r.clone());
    }
    groups.into_iter().map(|(t, g)| Ok((t, composite_rank(&g)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(model: &str, m: [f64; 6]) -> MetricsRecord {
        MetricsRecord {
            ticker: "T".into(),
            model: model.into(),
            feature_set: "HLOV".into(),
            metrics: Metrics {
                mape: m[0],
                mae: m[1],
                mse: m[2],
                rmse: m[3],
                r2: m[4],
                smape: m[5],
            },
        }
    }

    #[test]
    fn fixture_values() {
        let m = compute_metrics(&[100.0, 200.0], &[110.0, 180.0]).unwrap();
        // |10|/100 and |20|/200 are both 10%.
        assert!((m.mape - 10.0).abs() < 1e-12);
        assert!((m.mae - 15.0).abs() < 1e-12);
        assert!((m.mse - 250.0).abs() < 1e-12);
        assert!((m.rmse - 250f64.sqrt()).abs() < 1e-12);
        // SS_res = 500, SS_tot = 5000.
        assert!((m.r2 - 0.9).abs() < 1e-12);
        let smape = 50.0 * (10.0 / 105.0 + 20.0 / 190.0);
        assert!((m.smape - smape).abs() < 1e-12);
        assert!((m.smape - 10.025063).abs() < 1e-6);
    }

    #[test]
    fn perfect_and_null_models() {
        let t = [3.0, 5.0, 4.0];
        let m = compute_metrics(&t, &t).unwrap();
        assert_eq!([m.mape, m.mae, m.mse, m.rmse, m.smape], [0.0; 5]);
        assert_eq!(m.r2, 1.0);
        let m = compute_metrics(&t, &[4.0; 3]).unwrap();
        assert!(m.r2.abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(compute_metrics(&[0.0, 1.0], &[1.0, 1.0]), Err(Error::Domain(_))));
        assert!(matches!(compute_metrics(&[2.0, 2.0], &[1.0, 1.0]), Err(Error::Domain(_))));
        assert!(compute_metrics(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ranking_examples() {
        let a = rec("A", [1.0, 2.0, 3.0, 4.0, 0.9, 1.0]);
        let b = rec("B", [2.0, 3.0, 4.0, 5.0, 0.5, 2.0]);
        let r = composite_rank(&[b.clone(), a.clone()]).unwrap();
        assert_eq!(r[0].record.model, "A");
        assert_eq!(r[0].composite, 1.0);
        assert_eq!(r[1].composite, 2.0);

        // A ranks [1,2,1,1,2,1], B ranks [2,1,2,2,1,2]
        let a = rec("A", [1.0, 9.0, 1.0, 1.0, 0.1, 1.0]);
        let b = rec("B", [2.0, 1.0, 2.0, 2.0, 0.9, 2.0]);
        let r = composite_rank(&[b, a]).unwrap();
        assert_eq!(r[0].record.model, "A");
        assert!((r[0].composite - 8.0 / 6.0).abs() < 1e-12);
        assert!((r[1].composite - 10.0 / 6.0).abs() < 1e-12);
        assert_eq!((r[0].position, r[1].position), (1, 2));
    }

    #[test]
    fn ties_keep_input_order() {
        let m = [1.0, 1.0, 1.0, 1.0, 0.5, 1.0];
        let r = composite_rank(&[rec("X", m), rec("Y", m), rec("Z", m)]).unwrap();
        assert_eq!(r.iter().map(|x| x.record.model.as_str()).collect::<Vec<_>>(), ["X", "Y", "Z"]);
        assert!(r.iter().all(|x| x.composite == r[0].composite));
    }

    #[test]
    fn mape_breaks_composite_ties() {
        // equal composites (9 / 6 each) but B wins on MAPE
        let a = rec("A", [2.0, 1.0, 1.0, 1.0, 0.5, 1.0]);
        let b = rec("B", [1.0, 2.0, 2.0, 2.0, 0.9, 2.0]);
        let a2 = rec("A", [2.0, 1.0, 3.0, 2.0, 0.9, 1.0]);
        let r = composite_rank(&[a2, b.clone()]).unwrap();
        assert_eq!(r[0].composite, r[1].composite);
        assert_eq!(r[0].record.model, "B");
        let r = composite_rank(&[a, b]).unwrap();
        assert_eq!(r[0].record.model, "A");
    }

    #[test]
    fn missing_metric_is_validation_error() {
        let r = composite_rank(&[rec("A", [f64::NAN, 1.0, 1.0, 1.0, 1.0, 1.0]), rec("B", [1.0; 6])]);
        assert!(matches!(r, Err(Error::Validation { .. })));
        assert!(composite_rank(&[rec("A", [1.0; 6])]).is_err());
    }

    fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..30).prop_flat_map(|n| {
            (
                proptest::collection::vec(1.0f64..100.0, n),
                proptest::collection::vec(1.0f64..100.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn invariants((t, p) in series(), c in 0.01f64..100.0) {
            prop_assume!(t.iter().any(|v| *v != t[0]));
            let m = compute_metrics(&t, &p).unwrap();
            prop_assert!((m.rmse - m.mse.sqrt()).abs() < 1e-9);
            prop_assert!(m.mape >= 0.0 && m.smape >= 0.0);

            let ts: Vec<f64> = t.iter().map(|v| v * c).collect();
            let ps: Vec<f64> = p.iter().map(|v| v * c).collect();
            let s = compute_metrics(&ts, &ps).unwrap();
            prop_assert!((s.mape - m.mape).abs() < 1e-9 * m.mape.max(1.0));
            prop_assert!((s.smape - m.smape).abs() < 1e-9 * m.smape.max(1.0));

            let swapped = compute_metrics(&p, &t);
            if let Ok(sw) = swapped {
                prop_assert!((sw.smape - m.smape).abs() < 1e-9 * m.smape.max(1.0));
            }
        }

        #[test]
        fn zero_error_iff_equal((t, p) in series()) {
            prop_assume!(t.iter().any(|v| *v != t[0]));
            let m = compute_metrics(&t, &p).unwrap();
            let equal = t == p;
            prop_assert_eq!(m.mae == 0.0, equal);
            prop_assert_eq!(m.r2 == 1.0, m.mse == 0.0);
        }

        #[test]
        fn monotone_transform_keeps_order(vals in proptest::collection::vec(proptest::array::uniform6(0.1f64..10.0), 2..6)) {
            let recs: Vec<MetricsRecord> = vals.iter().enumerate().map(|(i, m)| rec(&i.to_string(), *m)).collect();
            let base = composite_rank(&recs).unwrap();
            let transformed: Vec<MetricsRecord> = recs.iter().map(|r| {
                let mut r = r.clone();
                r.metrics.mae = r.metrics.mae.ln() * 3.0 + 7.0;
                r
            }).collect();
            let after = composite_rank(&transformed).unwrap();
            let names = |v: &[RankedRecord]| v.iter().map(|x| (x.record.model.clone(), x.ranks)).collect::<Vec<_>>();
            prop_assert_eq!(names(&base), names(&after));
        }
    }
}
