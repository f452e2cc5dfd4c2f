use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{Graph, Init, ParamId, ParamStore, Tensor, Var};

/// `y = (x − x_L)ᵀ W + b + x_L` over the close channel.
#[derive(Debug, Clone)]
pub struct NLinear {
    pub lookback: usize,
    pub horizon: usize,
    /// `[lookback, horizon]`.
    pub weight: ParamId,
    pub bias: ParamId,
}

impl NLinear {
    pub fn new<R: Rng>(store: &mut ParamStore, lookback: usize, horizon: usize, const_init: bool, rng: &mut R) -> Self {
        let init = if const_init {
            Init::Constant(1.0 / lookback as f64)
        } else {
            Init::Uniform(1.0 / (lookback as f64).sqrt())
        };
        let weight = store.init("nlinear.weight", &[lookback, horizon], init, rng);
        let bias = store.init("nlinear.bias", &[horizon], Init::Zeros, rng);
        Self {
            lookback,
            horizon,
            weight,
            bias,
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.lookback {
            return Err(Error::Shape(format!("NLinear expects {} inputs, got {len}", self.lookback)));
        }
        Ok(())
    }

    /// Plain evaluation without a graph.
    pub fn forward_values(&self, store: &ParamStore, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x.len())?;
        let w = &store.get(self.weight).value;
        let b = store.get(self.bias).value.data();
        let last = x[self.lookback - 1];
        Ok((0..self.horizon)
            .map(|k| {
                let s: f64 = x.iter().enumerate().map(|(i, xi)| (xi - last) * w.at(i, k)).sum();
                s + b[k] + last
            })
            .collect())
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        self.check(g.value(x).len())?;
        let last = g.slice(x, self.lookback - 1, 1);
        let ones_l = g.input(Tensor::filled(&[self.lookback, 1], 1.0));
        let ones_h = g.input(Tensor::filled(&[self.horizon, 1], 1.0));
        let spread_l = g.matvec(ones_l, last);
        let centered = g.sub(x, spread_l);
        let w = g.param(self.weight);
        let wt = g.transpose(w);
        let y = g.matvec(wt, centered);
        let b = g.param(self.bias);
        let y = g.add(y, b);
        let spread_h = g.matvec(ones_h, last);
        Ok(g.add(y, spread_h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(l: usize, h: usize, const_init: bool, seed: u64) -> (ParamStore, NLinear) {
        let mut store = ParamStore::new();
        let m = NLinear::new(&mut store, l, h, const_init, &mut ChaCha8Rng::seed_from_u64(seed));
        (store, m)
    }

    #[test]
    fn const_init_examples() {
        let (store, m) = model(3, 1, true, 0);
        let y = m.forward_values(&store, &[1.0, 2.0, 3.0]).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-15);
        let (store, m) = model(5, 3, true, 0);
        assert_eq!(m.forward_values(&store, &[4.25; 5]).unwrap(), vec![4.25; 3]);
    }

    #[test]
    fn graph_matches_plain() {
        let (store, m) = model(6, 3, false, 11);
        let x = vec![0.3, -1.0, 2.2, 0.8, -0.1, 1.7];
        let mut g = Graph::new(&store);
        let xv = g.input_vector(x.clone());
        let y = m.forward(&mut g, xv).unwrap();
        let plain = m.forward_values(&store, &x).unwrap();
        for (a, b) in g.value(y).data().iter().zip(&plain) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_length_is_shape_error() {
        let (store, m) = model(4, 2, true, 0);
        assert!(matches!(m.forward_values(&store, &[1.0, 2.0]), Err(Error::Shape(_))));
    }

    proptest! {
        #[test]
        fn shift_equivariant(x in proptest::collection::vec(-5.0f64..5.0, 8), c in -100.0f64..100.0, seed in 0u64..50) {
            let (store, m) = model(8, 3, false, seed);
            let base = m.forward_values(&store, &x).unwrap();
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let moved = m.forward_values(&store, &shifted).unwrap();
            for (a, b) in base.iter().zip(&moved) {
                prop_assert!((a + c - b).abs() < 1e-9);
            }
        }
    }
}
