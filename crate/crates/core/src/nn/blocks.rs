//! Network building blocks: linear layers, normalisation, gated feed-forward,
//! gated residual networks, LSTM, multi-head attention and variable
//! selection. Each block owns [`ParamId`]s into a shared [`ParamStore`] and
//! records its forward pass on a [`Graph`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{Graph, Var};
use super::params::{Init, ParamId, ParamStore};
use crate::error::{Error, Result};

fn check_len(g: &Graph, v: Var, expected: usize, what: &str) -> Result<()> {
    let got = g.value(v).len();
    if got != expected {
        return Err(Error::Shape(format!("{what}: expected length {expected}, got {got}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormType {
    #[serde(alias = "rmsnorm")]
    RmsNorm,
    /// Standard layer normalisation (listed as "LinearNorm" in grids).
    #[serde(alias = "layernorm", alias = "linear_norm", alias = "linearnorm")]
    LayerNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedForwardKind {
    #[serde(rename = "swiglu", alias = "swi_glu")]
    SwiGlu,
    Relu,
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, bias: bool, rng: &mut R) -> Self {
        let weight = store.init(format!("{name}.weight"), &[out_dim, in_dim], Init::Xavier, rng);
        let bias = bias.then(|| store.init(format!("{name}.bias"), &[out_dim], Init::Zeros, rng));
        Self {
            weight,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let w = g.param(self.weight);
        let y = g.matvec(w, x);
        match self.bias {
            Some(b) => {
                let b = g.param(b);
                g.add(y, b)
            }
            None => y,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Norm {
    pub kind: NormType,
    pub gain: ParamId,
    pub bias: Option<ParamId>,
}

impl Norm {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, dim: usize, kind: NormType, rng: &mut R) -> Self {
        let gain = store.init(format!("{name}.gain"), &[dim], Init::Ones, rng);
        let bias = (kind == NormType::LayerNorm).then(|| store.init(format!("{name}.bias"), &[dim], Init::Zeros, rng));
        Self { kind, gain, bias }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Var {
        let gain = g.param(self.gain);
        match (self.kind, self.bias) {
            (NormType::LayerNorm, Some(b)) => {
                let b = g.param(b);
                g.layer_norm(x, gain, b)
            }
            _ => g.rms_norm(x, gain),
        }
    }
}

/// `W3 (silu(W1 x) ⊙ W2 x)` or `W3 relu(W1 x)`, without biases.
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub kind: FeedForwardKind,
    pub w1: ParamId,
    pub w2: Option<ParamId>,
    pub w3: ParamId,
    pub in_dim: usize,
}

impl FeedForward {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        kind: FeedForwardKind,
        in_dim: usize,
        inner_dim: usize,
        out_dim: usize,
        rng: &mut R,
    ) -> Self {
        let w1 = store.init(format!("{name}.w1"), &[inner_dim, in_dim], Init::Xavier, rng);
        let w2 = (kind == FeedForwardKind::SwiGlu)
            .then(|| store.init(format!("{name}.w2"), &[inner_dim, in_dim], Init::Xavier, rng));
        let w3 = store.init(format!("{name}.w3"), &[out_dim, inner_dim], Init::Xavier, rng);
        Self {
            kind,
            w1,
            w2,
            w3,
            in_dim,
        }
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        check_len(g, x, self.in_dim, "feed-forward input")?;
        let w1 = g.param(self.w1);
        let w3 = g.param(self.w3);
        let h1 = g.matvec(w1, x);
        let inner = match (self.kind, self.w2) {
            (FeedForwardKind::SwiGlu, Some(w2)) => {
                let w2 = g.param(w2);
                let gate = g.silu(h1);
                let lin = g.matvec(w2, x);
                g.mul(gate, lin)
            }
            _ => g.relu(h1),
        };
        Ok(g.matvec(w3, inner))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrnHidden {
    /// `elu(W_a x + W_c c + b_a)`.
    Elu,
    /// A feed-forward block of the given kind, plus `W_c c` when a context
    /// is supplied.
    FeedForward(FeedForwardKind),
}

#[derive(Debug, Clone)]
pub struct GrnConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    pub context_dim: Option<usize>,
    pub hidden: GrnHidden,
    pub norm: NormType,
    pub dropout: f64,
}

/// Gated residual network:
/// `y = norm(skip(x) + dropout(GLU(W_g a + b_g)))` with `GLU(u, v) = u ⊙ σ(v)`
/// over the two halves of the gate projection.
#[derive(Debug, Clone)]
pub struct Grn {
    cfg: GrnConfig,
    dense: Option<Linear>,
    ff: Option<FeedForward>,
    context: Option<Linear>,
    gate: Linear,
    skip: Option<Linear>,
    norm: Norm,
}

impl Grn {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, cfg: GrnConfig, rng: &mut R) -> Self {
        let (dense, ff) = match cfg.hidden {
            GrnHidden::Elu => (Some(Linear::new(store, &format!("{name}.dense"), cfg.input_dim, cfg.hidden_dim, true, rng)), None),
            GrnHidden::FeedForward(kind) => (
                None,
                Some(FeedForward::new(
                    store,
                    &format!("{name}.ff"),
                    kind,
                    cfg.input_dim,
                    cfg.hidden_dim,
                    cfg.hidden_dim,
                    rng,
                )),
            ),
        };
        let context = cfg
            .context_dim
            .map(|c| Linear::new(store, &format!("{name}.context"), c, cfg.hidden_dim, false, rng));
        let gate = Linear::new(store, &format!("{name}.gate"), cfg.hidden_dim, 2 * cfg.output_dim, true, rng);
        let skip = (cfg.input_dim != cfg.output_dim)
            .then(|| Linear::new(store, &format!("{name}.skip"), cfg.input_dim, cfg.output_dim, true, rng));
        let norm = Norm::new(store, &format!("{name}.norm"), cfg.output_dim, cfg.norm, rng);
        Self {
            cfg,
            dense,
            ff,
            context,
            gate,
            skip,
            norm,
        }
    }

    pub fn config(&self) -> &GrnConfig {
        &self.cfg
    }

    pub fn forward(&self, g: &mut Graph, x: Var, context: Option<Var>) -> Result<Var> {
        check_len(g, x, self.cfg.input_dim, "GRN input")?;
        let pre = match (&self.dense, &self.ff) {
            (Some(d), _) => d.forward(g, x),
            (None, Some(ff)) => ff.forward(g, x)?,
            (None, None) => unreachable!("GRN has a hidden stage"),
        };
        let pre = match (&self.context, context) {
            (Some(lin), Some(c)) => {
                check_len(g, c, lin.in_dim, "GRN context")?;
                let cc = lin.forward(g, c);
                g.add(pre, cc)
            }
            _ => pre,
        };
        let a = match self.cfg.hidden {
            GrnHidden::Elu => g.elu(pre),
            GrnHidden::FeedForward(_) => pre,
        };
        let proj = self.gate.forward(g, a);
        let out = self.cfg.output_dim;
        let u = g.slice(proj, 0, out);
        let v = g.slice(proj, out, out);
        let sv = g.sigmoid(v);
        let gated = g.mul(u, sv);
        let gated = g.dropout(gated, self.cfg.dropout);
        let residual = match &self.skip {
            Some(s) => s.forward(g, x),
            None => x,
        };
        let sum = g.add(residual, gated);
        Ok(self.norm.forward(g, sum))
    }
}

#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            w_ih: store.init(format!("{name}.w_ih"), &[4 * hidden, input_dim], Init::Xavier, rng),
            w_hh: store.init(format!("{name}.w_hh"), &[4 * hidden, hidden], Init::Xavier, rng),
            bias: store.init(format!("{name}.bias"), &[4 * hidden], Init::Zeros, rng),
            input_dim,
            hidden,
        }
    }

    /// Gate order in the stacked projection: input, forget, cell, output.
    pub fn step(&self, g: &mut Graph, x: Var, h_prev: Var, c_prev: Var) -> Result<(Var, Var)> {
        check_len(g, x, self.input_dim, "LSTM input")?;
        check_len(g, h_prev, self.hidden, "LSTM hidden state")?;
        check_len(g, c_prev, self.hidden, "LSTM cell state")?;
        let h = self.hidden;
        let (w_ih, w_hh, b) = (g.param(self.w_ih), g.param(self.w_hh), g.param(self.bias));
        let zx = g.matvec(w_ih, x);
        let zh = g.matvec(w_hh, h_prev);
        let z = g.add(zx, zh);
        let z = g.add(z, b);
        let zi = g.slice(z, 0, h);
        let zf = g.slice(z, h, h);
        let zg = g.slice(z, 2 * h, h);
        let zo = g.slice(z, 3 * h, h);
        let i = g.sigmoid(zi);
        let f = g.sigmoid(zf);
        let cand = g.tanh(zg);
        let o = g.sigmoid(zo);
        let keep = g.mul(f, c_prev);
        let write = g.mul(i, cand);
        let c = g.add(keep, write);
        let tc = g.tanh(c);
        let h_new = g.mul(o, tc);
        Ok((h_new, c))
    }
}

/// Stacked LSTM over a sequence; every layer starts from the same `(h0, c0)`.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub layers: Vec<LstmCell>,
}

impl Lstm {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input_dim: usize, hidden: usize, layers: usize, rng: &mut R) -> Self {
        let layers = (0..layers.max(1))
            .map(|l| LstmCell::new(store, &format!("{name}.l{l}"), if l == 0 { input_dim } else { hidden }, hidden, rng))
            .collect();
        Self { layers }
    }

    pub fn forward(&self, g: &mut Graph, inputs: &[Var], h0: Var, c0: Var) -> Result<Vec<Var>> {
        let mut seq = inputs.to_vec();
        for cell in &self.layers {
            let (mut h, mut c) = (h0, c0);
            let mut out = Vec::with_capacity(seq.len());
            for &x in &seq {
                (h, c) = cell.step(g, x, h, c)?;
                out.push(h);
            }
            seq = out;
        }
        Ok(seq)
    }
}

#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
    pub dim: usize,
    pub n_heads: usize,
}

impl MultiHeadAttention {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, dim: usize, n_heads: usize, rng: &mut R) -> Result<Self> {
        if n_heads == 0 || dim % n_heads != 0 {
            return Err(Error::Config(format!("hidden size {dim} is not divisible by {n_heads} heads")));
        }
        Ok(Self {
            wq: store.init(format!("{name}.wq"), &[dim, dim], Init::Xavier, rng),
            wk: store.init(format!("{name}.wk"), &[dim, dim], Init::Xavier, rng),
            wv: store.init(format!("{name}.wv"), &[dim, dim], Init::Xavier, rng),
            wo: store.init(format!("{name}.wo"), &[dim, dim], Init::Xavier, rng),
            dim,
            n_heads,
        })
    }

    /// Rows of `queries`, `keys`, `values` are positions. With `causal`, the
    /// last query row lines up with the last key row. Returns the output
    /// matrix and the per-head attention weight matrices.
    pub fn forward_with_weights(
        &self,
        g: &mut Graph,
        queries: Var,
        keys: Var,
        values: Var,
        causal: bool,
    ) -> Result<(Var, Vec<Var>)> {
        for (v, what) in [(queries, "queries"), (keys, "keys"), (values, "values")] {
            if g.value(v).cols() != self.dim || g.value(v).rank() != 2 {
                return Err(Error::Shape(format!("attention {what} must be [n, {}], got {:?}", self.dim, g.shape(v))));
            }
        }
        if g.value(keys).rows() != g.value(values).rows() {
            return Err(Error::Shape("attention keys and values differ in length".into()));
        }
        let dk = self.dim / self.n_heads;
        let (wq, wk, wv, wo) = (g.param(self.wq), g.param(self.wk), g.param(self.wv), g.param(self.wo));
        let q = g.matmul(queries, wq);
        let k = g.matmul(keys, wk);
        let v = g.matmul(values, wv);
        let scale = 1.0 / (dk as f64).sqrt();
        let mut heads = Vec::with_capacity(self.n_heads);
        let mut weights = Vec::with_capacity(self.n_heads);
        for h in 0..self.n_heads {
            let qh = g.col_slice(q, h * dk, dk);
            let kh = g.col_slice(k, h * dk, dk);
            let vh = g.col_slice(v, h * dk, dk);
            let kt = g.transpose(kh);
            let scores = g.matmul(qh, kt);
            let scores = g.scale(scores, scale);
            let att = if causal { g.causal_softmax(scores) } else { g.softmax(scores) };
            weights.push(att);
            heads.push(g.matmul(att, vh));
        }
        let cat = if heads.len() == 1 { heads[0] } else { g.concat_cols(&heads) };
        Ok((g.matmul(cat, wo), weights))
    }

    pub fn forward(&self, g: &mut Graph, queries: Var, keys: Var, values: Var, causal: bool) -> Result<Var> {
        Ok(self.forward_with_weights(g, queries, keys, values, causal)?.0)
    }
}

/// Soft selection over `F` embedded inputs: weights come from a GRN over the
/// flattened inputs (and optional context), and each input is transformed by
/// its own GRN before the weighted sum.
#[derive(Debug, Clone)]
pub struct VariableSelection {
    pub n_vars: usize,
    pub input_dim: usize,
    pub hidden: usize,
    selector: Grn,
    per_var: Vec<Grn>,
}

impl VariableSelection {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        n_vars: usize,
        input_dim: usize,
        hidden: usize,
        context_dim: Option<usize>,
        norm: NormType,
        dropout: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if n_vars == 0 {
            return Err(Error::Config("variable selection needs at least one variable".into()));
        }
        let selector = Grn::new(
            store,
            &format!("{name}.selector"),
            GrnConfig {
                input_dim: n_vars * input_dim,
                hidden_dim: hidden,
                output_dim: n_vars,
                context_dim,
                hidden: GrnHidden::Elu,
                norm,
                dropout,
            },
            rng,
        );
        let per_var = (0..n_vars)
            .map(|f| {
                Grn::new(
                    store,
                    &format!("{name}.var{f}"),
                    GrnConfig {
                        input_dim,
                        hidden_dim: hidden,
                        output_dim: hidden,
                        context_dim: None,
                        hidden: GrnHidden::Elu,
                        norm,
                        dropout,
                    },
                    rng,
                )
            })
            .collect();
        Ok(Self {
            n_vars,
            input_dim,
            hidden,
            selector,
            per_var,
        })
    }

    /// Returns `(combined, weights)`.
    pub fn forward(&self, g: &mut Graph, vars: &[Var], context: Option<Var>) -> Result<(Var, Var)> {
        if vars.len() != self.n_vars {
            return Err(Error::Shape(format!("expected {} variables, got {}", self.n_vars, vars.len())));
        }
        let flat = g.concat(vars);
        let logits = self.selector.forward(g, flat, context)?;
        let weights = g.softmax(logits);
        let processed = vars
            .iter()
            .zip(&self.per_var)
            .map(|(v, grn)| grn.forward(g, *v, None))
            .collect::<Result<Vec<_>>>()?;
        let stacked = g.stack(&processed);
        let st = g.transpose(stacked);
        let combined = g.matvec(st, weights);
        Ok((combined, weights))
    }
}
