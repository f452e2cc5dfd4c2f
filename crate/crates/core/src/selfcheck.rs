//! Finite-difference checks of every differentiable component at tiny
//! sizes, used by the test suites and by `sentcast selfcheck`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::models::{loss_node, LossKind, NLinear, TftLite, TftLiteConfig, WindowSample, DMSE_ALPHA};
use crate::nn::{
    gradcheck, FeedForward, FeedForwardKind, GradCheckReport, Graph, Grn, GrnConfig, GrnHidden, Init, LstmCell,
    MultiHeadAttention, NormType, ParamStore, Tensor, Var, VariableSelection,
};

pub const GRADCHECK_DELTA: f64 = 1e-5;
pub const GRADCHECK_TOL: f64 = 1e-4;

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `Σ w ⊙ y` with fixed random `w`, so every output coordinate matters.
fn project(g: &mut Graph, y: Var, w: &[f64]) -> Var {
    let shape = g.shape(y).to_vec();
    let wv = g.input(Tensor::new(shape, w.to_vec()).expect("shape"));
    let p = g.mul(y, wv);
    g.sum(p)
}

fn check<F>(store: &ParamStore, f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph) -> Result<Var> + Sync + Send,
{
    gradcheck(store, f, GRADCHECK_DELTA, GRADCHECK_TOL)
}

pub fn check_rms_norm(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let x = store.add("x", Tensor::vector(uniform(&mut rng, 6)));
    let gain = store.init("gain", &[6], Init::Uniform(1.5), &mut rng);
    let w = uniform(&mut rng, 6);
    check(&store, |g| {
        let (xv, gv) = (g.param(x), g.param(gain));
        let y = g.rms_norm(xv, gv);
        Ok(project(g, y, &w))
    })
}

pub fn check_feed_forward(kind: FeedForwardKind, seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let ff = FeedForward::new(&mut store, "ff", kind, 4, 6, 3, &mut rng);
    let x = store.add("x", Tensor::vector(uniform(&mut rng, 4)));
    let w = uniform(&mut rng, 3);
    check(&store, |g| {
        let xv = g.param(x);
        let y = ff.forward(g, xv)?;
        Ok(project(g, y, &w))
    })
}

pub fn check_grn(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let cfg = GrnConfig {
        input_dim: 4,
        hidden_dim: 5,
        output_dim: 3,
        context_dim: Some(2),
        hidden: GrnHidden::Elu,
        norm: NormType::LayerNorm,
        dropout: 0.0,
    };
    let grn = Grn::new(&mut store, "grn", cfg, &mut rng);
    let x = store.add("x", Tensor::vector(uniform(&mut rng, 4)));
    let c = store.add("c", Tensor::vector(uniform(&mut rng, 2)));
    let w = uniform(&mut rng, 3);
    check(&store, |g| {
        let (xv, cv) = (g.param(x), g.param(c));
        let y = grn.forward(g, xv, Some(cv))?;
        Ok(project(g, y, &w))
    })
}

pub fn check_lstm_step(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let cell = LstmCell::new(&mut store, "lstm", 3, 4, &mut rng);
    let x = store.add("x", Tensor::vector(uniform(&mut rng, 3)));
    let h = store.add("h", Tensor::vector(uniform(&mut rng, 4)));
    let c = store.add("c", Tensor::vector(uniform(&mut rng, 4)));
    let (wh, wc) = (uniform(&mut rng, 4), uniform(&mut rng, 4));
    check(&store, |g| {
        let (xv, hv, cv) = (g.param(x), g.param(h), g.param(c));
        let (h1, c1) = cell.step(g, xv, hv, cv)?;
        let a = project(g, h1, &wh);
        let b = project(g, c1, &wc);
        Ok(g.add(a, b))
    })
}

pub fn check_attention(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let mha = MultiHeadAttention::new(&mut store, "mha", 4, 2, &mut rng)?;
    let q = store.add("q", Tensor::matrix(3, 4, uniform(&mut rng, 12))?);
    let kv = store.add("kv", Tensor::matrix(3, 4, uniform(&mut rng, 12))?);
    let w = uniform(&mut rng, 12);
    check(&store, |g| {
        let (qv, kvv) = (g.param(q), g.param(kv));
        let y = mha.forward(g, qv, kvv, kvv, true)?;
        Ok(project(g, y, &w))
    })
}

pub fn check_variable_selection(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let vs = VariableSelection::new(&mut store, "vs", 3, 2, 4, Some(4), NormType::RmsNorm, 0.0, &mut rng)?;
    let vars: Vec<_> = (0..3)
        .map(|i| store.add(format!("v{i}"), Tensor::vector(uniform(&mut rng, 2))))
        .collect();
    let ctx = store.add("ctx", Tensor::vector(uniform(&mut rng, 4)));
    let (w, wsel) = (uniform(&mut rng, 4), uniform(&mut rng, 3));
    check(&store, |g| {
        let vv: Vec<Var> = vars.iter().map(|id| g.param(*id)).collect();
        let cv = g.param(ctx);
        let (combined, weights) = vs.forward(g, &vv, Some(cv))?;
        let a = project(g, combined, &w);
        let b = project(g, weights, &wsel);
        Ok(g.add(a, b))
    })
}

pub fn check_nlinear(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let m = NLinear::new(&mut store, 6, 2, false, &mut rng);
    let x = store.add("x", Tensor::vector(uniform(&mut rng, 6)));
    let truth = uniform(&mut rng, 2);
    check(&store, |g| {
        let xv = g.param(x);
        let y = m.forward(g, xv)?;
        loss_node(g, y, &truth, 0.0, LossKind::Mse, DMSE_ALPHA)
    })
}

/// TFT-lite at `H = 8, L = 6, F = 3, h = 2` composed with the directional
/// loss.
pub fn check_tft_dmse(seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let cfg = TftLiteConfig {
        n_companies: 2,
        n_features: 3,
        lookback: 6,
        horizon: 2,
        hidden: 8,
        lstm_layers: 1,
        n_heads: 2,
        feed_forward: FeedForwardKind::SwiGlu,
        dropout: 0.0,
        hidden_continuous: 4,
        norm: NormType::RmsNorm,
    };
    let model = TftLite::new(&mut store, cfg, &mut rng)?;
    let mut kf = vec![0.0; 12];
    kf[1 + rng.random_range(0..5)] = 1.0;
    kf[6 + 1 + rng.random_range(0..5)] = 1.0;
    let mut sample = WindowSample {
        company: rng.random_range(0..2),
        target_start: 6,
        past: Tensor::matrix(6, 3, uniform(&mut rng, 18))?,
        known_future: Tensor::matrix(2, 6, kf)?,
        target: vec![0.0; 2],
        anchor: 0.0,
    };
    // Targets sit close to the initial forecast so the loss stays O(1) and
    // the central difference is not swamped by round-off. The anchor lies
    // between truth and forecast on the first step, so that step always
    // takes the penalised branch.
    let y0 = {
        let mut g = Graph::new(&store);
        let y = model.forward(&mut g, &sample)?;
        g.value(y).data().to_vec()
    };
    let e = 0.05;
    sample.target = vec![y0[0] + e, y0[1] + rng.random_range(-e..e)];
    sample.anchor = y0[0] + e / 2.0;
    debug_assert!(crate::models::direction_weights(&y0, &sample.target, sample.anchor, DMSE_ALPHA)[0] == DMSE_ALPHA);
    check(&store, |g| {
        let y = model.forward(g, &sample)?;
        loss_node(g, y, &sample.target, sample.anchor, LossKind::Dmse, DMSE_ALPHA)
    })
}

/// Every component check for one seed, labelled.
pub fn gradient_suite(seed: u64) -> Result<Vec<(&'static str, GradCheckReport)>> {
    Ok(vec![
        ("rms_norm", check_rms_norm(seed)?),
        ("swiglu_ff", check_feed_forward(FeedForwardKind::SwiGlu, seed)?),
        ("relu_ff", check_feed_forward(FeedForwardKind::Relu, seed)?),
        ("grn", check_grn(seed)?),
        ("lstm_step", check_lstm_step(seed)?),
        ("multi_head_attention", check_attention(seed)?),
        ("variable_selection", check_variable_selection(seed)?),
        ("nlinear", check_nlinear(seed)?),
        ("tft_lite_dmse", check_tft_dmse(seed)?),
    ])
}
