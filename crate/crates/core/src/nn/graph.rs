//! Tape-based reverse-mode differentiation over small dense tensors.
//!
//! A [`Graph`] records every primitive op of one forward pass. Values of
//! parameters are read from a borrowed [`ParamStore`]; [`Graph::backward`]
//! walks the tape once in reverse and returns per-parameter gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{Gradients, ParamId, ParamStore};
use super::tensor::Tensor;

pub const NORM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// `W x` for `W: [m, n]`, `x: [n]`.
    MatVec(Var, Var),
    /// `A B` for `A: [m, k]`, `B: [k, n]`.
    MatMul(Var, Var),
    Transpose(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Silu(Var),
    Elu(Var),
    /// Along the last axis; masked entries are exactly zero in the output.
    Softmax(Var),
    Concat(Vec<Var>),
    Slice { x: Var, start: usize },
    Stack(Vec<Var>),
    Row { x: Var, index: usize },
    ColSlice { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    Sum(Var),
    Mean(Var),
    RmsNorm { x: Var, gain: Var },
    LayerNorm { x: Var, gain: Var, bias: Var },
}

struct Node {
    op: Op,
    value: Tensor,
}

pub struct Graph<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
    training: bool,
    rng: ChaCha8Rng,
}

impl<'a> Graph<'a> {
    /// Evaluation-mode graph: dropout is the identity.
    pub fn new(store: &'a ParamStore) -> Self {
        Self::with_mode(store, false, 0)
    }

    /// Training-mode graph whose dropout masks are drawn from `seed`.
    pub fn training(store: &'a ParamStore, seed: u64) -> Self {
        Self::with_mode(store, true, seed)
    }

    fn with_mode(store: &'a ParamStore, training: bool, seed: u64) -> Self {
        Self {
            store,
            nodes: Vec::with_capacity(256),
            param_vars: vec![None; store.len()],
            training,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match self.nodes[v.0].op {
            Op::Param(id) => &self.store.get(id).value,
            _ => &self.nodes[v.0].value,
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Op::Input, t)
    }

    pub fn input_vector(&mut self, data: Vec<f64>) -> Var {
        self.input(Tensor::vector(data))
    }

    /// The node for a parameter; repeated calls share one node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let v = self.push(Op::Param(id), Tensor::zeros(&[0]));
        self.param_vars[id.0] = Some(v);
        v
    }

    fn zip_map(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (ta, tb) = (self.value(a), self.value(b));
        assert_eq!(ta.shape(), tb.shape(), "elementwise op on mismatched shapes");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        Tensor::new(ta.shape().to_vec(), data).expect("shape preserved")
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(a);
        Tensor::new(t.shape().to_vec(), t.data().iter().map(|x| f(*x)).collect()).expect("shape preserved")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip_map(a, b, |x, y| x + y);
        self.push(Op::Add(a, b), v)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip_map(a, b, |x, y| x - y);
        self.push(Op::Sub(a, b), v)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip_map(a, b, |x, y| x * y);
        self.push(Op::Mul(a, b), v)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.map(a, |x| x * c);
        self.push(Op::Scale(a, c), v)
    }

    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        let (tw, tx) = (self.value(w), self.value(x));
        assert_eq!(tw.rank(), 2, "matvec needs a matrix");
        let (m, n) = (tw.rows(), tw.cols());
        assert_eq!(tx.len(), n, "matvec: matrix is {m}x{n}, vector has {}", tx.len());
        let xd = tx.data();
        let out: Vec<f64> = (0..m).map(|i| dot(tw.row(i), xd)).collect();
        self.push(Op::MatVec(w, x), Tensor::vector(out))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        assert_eq!(tb.rows(), k, "matmul inner dimensions differ");
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let arow = ta.row(i);
            let orow = &mut out[i * n..(i + 1) * n];
            for (p, &av) in arow.iter().enumerate() {
                if av != 0.0 {
                    for (o, bv) in orow.iter_mut().zip(tb.row(p)) {
                        *o += av * bv;
                    }
                }
            }
        }
        self.push(Op::MatMul(a, b), Tensor::matrix(m, n, out).expect("shape"))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let (r, c) = (t.rows(), t.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = t.at(i, j);
            }
        }
        self.push(Op::Transpose(a), Tensor::matrix(c, r, out).expect("shape"))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.map(a, sigmoid);
        self.push(Op::Sigmoid(a), v)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.map(a, f64::tanh);
        self.push(Op::Tanh(a), v)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.map(a, |x| x.max(0.0));
        self.push(Op::Relu(a), v)
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let v = self.map(a, |x| x * sigmoid(x));
        self.push(Op::Silu(a), v)
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let v = self.map(a, |x| if x > 0.0 { x } else { x.exp_m1() });
        self.push(Op::Elu(a), v)
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        self.softmax_impl(a, false)
    }

    pub fn causal_softmax(&mut self, a: Var) -> Var {
        self.softmax_impl(a, true)
    }

    /// With `causal`, row `i` of an `[r, c]` matrix sees columns
    /// `0..=i + c - r`.
    fn softmax_impl(&mut self, a: Var, causal: bool) -> Var {
        let t = self.value(a);
        let (r, c) = (t.rows(), t.cols());
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let visible = if causal { (i + c + 1).saturating_sub(r).min(c) } else { c };
            let row = &t.row(i)[..visible];
            let mx = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            let orow = &mut out[i * c..i * c + visible];
            let mut total = 0.0;
            for (o, v) in orow.iter_mut().zip(row) {
                *o = (v - mx).exp();
                total += *o;
            }
            orow.iter_mut().for_each(|o| *o /= total);
        }
        let shape = t.shape().to_vec();
        self.push(Op::Softmax(a), Tensor::new(shape, out).expect("shape"))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let data: Vec<f64> = parts.iter().flat_map(|p| self.value(*p).data().iter().copied()).collect();
        self.push(Op::Concat(parts.to_vec()), Tensor::vector(data))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let data = self.value(a).data()[start..start + len].to_vec();
        self.push(Op::Slice { x: a, start }, Tensor::vector(data))
    }

    /// Stacks equal-length vectors into the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Var {
        let cols = self.value(rows[0]).len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let t = self.value(*r);
            assert_eq!(t.len(), cols, "stack: ragged rows");
            data.extend_from_slice(t.data());
        }
        self.push(Op::Stack(rows.to_vec()), Tensor::matrix(rows.len(), cols, data).expect("shape"))
    }

    pub fn row(&mut self, a: Var, index: usize) -> Var {
        let data = self.value(a).row(index).to_vec();
        self.push(Op::Row { x: a, index }, Tensor::vector(data))
    }

    pub fn col_slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        let t = self.value(a);
        let r = t.rows();
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&t.row(i)[start..start + len]);
        }
        self.push(Op::ColSlice { x: a, start }, Tensor::matrix(r, len, data).expect("shape"))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let r = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut data = Vec::with_capacity(r * total);
        for i in 0..r {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(i));
            }
        }
        self.push(Op::ConcatCols(parts.to_vec()), Tensor::matrix(r, total, data).expect("shape"))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Op::Mean(a), Tensor::scalar(s))
    }

    /// `gain ⊙ x / sqrt(mean(x²) + ε)`.
    pub fn rms_norm(&mut self, x: Var, gain: Var) -> Var {
        let (tx, tg) = (self.value(x), self.value(gain));
        assert_eq!(tx.len(), tg.len(), "rms_norm gain size");
        let r = rms(tx.data());
        let data = tx.data().iter().zip(tg.data()).map(|(v, g)| g * v / r).collect();
        self.push(Op::RmsNorm { x, gain }, Tensor::vector(data))
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let (tx, tg, tb) = (self.value(x), self.value(gain), self.value(bias));
        assert_eq!(tx.len(), tg.len(), "layer_norm gain size");
        let (mu, s) = mean_std(tx.data());
        let data = tx
            .data()
            .iter()
            .zip(tg.data())
            .zip(tb.data())
            .map(|((v, g), b)| g * (v - mu) / s + b)
            .collect();
        self.push(Op::LayerNorm { x, gain, bias }, Tensor::vector(data))
    }

    /// Inverted dropout; identity in evaluation mode or when `p == 0`.
    pub fn dropout(&mut self, x: Var, p: f64) -> Var {
        if !self.training || p <= 0.0 {
            return x;
        }
        let keep = 1.0 - p;
        let n = self.value(x).len();
        let shape = self.value(x).shape().to_vec();
        let mask: Vec<f64> = (0..n)
            .map(|_| if self.rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let m = self.input(Tensor::new(shape, mask).expect("shape"));
        self.mul(x, m)
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).len(), 1, "backward needs a scalar");
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let out = &self.nodes[i].value;
            match &self.nodes[i].op {
                Op::Input => {}
                Op::Param(_) => {
                    grads[i] = Some(g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, &g);
                    acc(&mut grads, *b, &g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, &g);
                    acc_map(&mut grads, *b, &g, |v| -v);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    acc_with(&mut grads, *a, ta.shape(), |d| {
                        for ((o, gv), bv) in d.iter_mut().zip(g.data()).zip(tb.data()) {
                            *o += gv * bv;
                        }
                    });
                    acc_with(&mut grads, *b, tb.shape(), |d| {
                        for ((o, gv), av) in d.iter_mut().zip(g.data()).zip(ta.data()) {
                            *o += gv * av;
                        }
                    });
                }
                Op::Scale(a, c) => acc_map(&mut grads, *a, &g, |v| v * c),
                Op::MatVec(w, x) => {
                    let (tw, tx) = (self.value(*w), self.value(*x));
                    let n = tw.cols();
                    acc_with(&mut grads, *w, tw.shape(), |d| {
                        for (r, gv) in g.data().iter().enumerate() {
                            if *gv != 0.0 {
                                for (o, xv) in d[r * n..(r + 1) * n].iter_mut().zip(tx.data()) {
                                    *o += gv * xv;
                                }
                            }
                        }
                    });
                    acc_with(&mut grads, *x, tx.shape(), |d| {
                        for (r, gv) in g.data().iter().enumerate() {
                            if *gv != 0.0 {
                                for (o, wv) in d.iter_mut().zip(tw.row(r)) {
                                    *o += gv * wv;
                                }
                            }
                        }
                    });
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                    let gd = g.data();
                    // dA = G Bᵀ
                    acc_with(&mut grads, *a, ta.shape(), |d| {
                        for i in 0..m {
                            for p in 0..k {
                                d[i * k + p] += dot(&gd[i * n..(i + 1) * n], tb.row(p));
                            }
                        }
                    });
                    // dB = Aᵀ G
                    acc_with(&mut grads, *b, tb.shape(), |d| {
                        for i in 0..m {
                            let grow = &gd[i * n..(i + 1) * n];
                            for (p, &av) in ta.row(i).iter().enumerate() {
                                if av != 0.0 {
                                    for (o, gv) in d[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                        *o += av * gv;
                                    }
                                }
                            }
                        }
                    });
                }
                Op::Transpose(a) => {
                    let ta = self.value(*a);
                    let (r, c) = (ta.rows(), ta.cols());
                    acc_with(&mut grads, *a, ta.shape(), |d| {
                        for i in 0..r {
                            for j in 0..c {
                                d[i * c + j] += g.data()[j * r + i];
                            }
                        }
                    });
                }
                Op::Sigmoid(a) => acc_zip(&mut grads, *a, &g, out, |gv, y| gv * y * (1.0 - y)),
                Op::Tanh(a) => acc_zip(&mut grads, *a, &g, out, |gv, y| gv * (1.0 - y * y)),
                Op::Relu(a) => {
                    let ta = self.value(*a);
                    acc_zip(&mut grads, *a, &g, ta, |gv, x| if x > 0.0 { gv } else { 0.0 });
                }
                Op::Silu(a) => {
                    let ta = self.value(*a);
                    acc_zip(&mut grads, *a, &g, ta, |gv, x| {
                        let s = sigmoid(x);
                        gv * (s + x * s * (1.0 - s))
                    });
                }
                Op::Elu(a) => {
                    let ta = self.value(*a);
                    acc_zip(&mut grads, *a, &g, ta, |gv, x| if x > 0.0 { gv } else { gv * x.exp() });
                }
                Op::Softmax(x) => {
                    let c = out.cols();
                    acc_with(&mut grads, *x, out.shape(), |d| {
                        for r in 0..out.rows() {
                            let y = out.row(r);
                            let gr = &g.data()[r * c..(r + 1) * c];
                            let inner = dot(y, gr);
                            for j in 0..c {
                                d[r * c + j] += y[j] * (gr[j] - inner);
                            }
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let len = self.value(*p).len();
                        let shape = self.value(*p).shape().to_vec();
                        acc_with(&mut grads, *p, &shape, |d| {
                            for (o, gv) in d.iter_mut().zip(&g.data()[off..off + len]) {
                                *o += gv;
                            }
                        });
                        off += len;
                    }
                }
                Op::Slice { x, start } => {
                    let shape = self.value(*x).shape().to_vec();
                    acc_with(&mut grads, *x, &shape, |d| {
                        for (o, gv) in d[*start..*start + g.len()].iter_mut().zip(g.data()) {
                            *o += gv;
                        }
                    });
                }
                Op::Stack(rows) => {
                    let c = out.cols();
                    for (r, v) in rows.iter().enumerate() {
                        let shape = self.value(*v).shape().to_vec();
                        acc_with(&mut grads, *v, &shape, |d| {
                            for (o, gv) in d.iter_mut().zip(&g.data()[r * c..(r + 1) * c]) {
                                *o += gv;
                            }
                        });
                    }
                }
                Op::Row { x, index } => {
                    let tx = self.value(*x);
                    let c = tx.cols();
                    acc_with(&mut grads, *x, tx.shape(), |d| {
                        for (o, gv) in d[index * c..(index + 1) * c].iter_mut().zip(g.data()) {
                            *o += gv;
                        }
                    });
                }
                Op::ColSlice { x, start } => {
                    let tx = self.value(*x);
                    let (c, len) = (tx.cols(), out.cols());
                    acc_with(&mut grads, *x, tx.shape(), |d| {
                        for i in 0..tx.rows() {
                            for j in 0..len {
                                d[i * c + start + j] += g.data()[i * len + j];
                            }
                        }
                    });
                }
                Op::ConcatCols(parts) => {
                    let total = out.cols();
                    let mut off = 0;
                    for p in parts {
                        let tp = self.value(*p);
                        let c = tp.cols();
                        acc_with(&mut grads, *p, tp.shape(), |d| {
                            for i in 0..tp.rows() {
                                for j in 0..c {
                                    d[i * c + j] += g.data()[i * total + off + j];
                                }
                            }
                        });
                        off += c;
                    }
                }
                Op::Sum(a) => {
                    let gv = g.data()[0];
                    let shape = self.value(*a).shape().to_vec();
                    acc_with(&mut grads, *a, &shape, |d| d.iter_mut().for_each(|o| *o += gv));
                }
                Op::Mean(a) => {
                    let ta = self.value(*a);
                    let gv = g.data()[0] / ta.len() as f64;
                    acc_with(&mut grads, *a, ta.shape(), |d| d.iter_mut().for_each(|o| *o += gv));
                }
                Op::RmsNorm { x, gain } => {
                    let (tx, tg) = (self.value(*x), self.value(*gain));
                    let n = tx.len() as f64;
                    let r = rms(tx.data());
                    let s: f64 = g.data().iter().zip(tg.data()).zip(tx.data()).map(|((gv, gn), xv)| gv * gn * xv).sum();
                    let k = s / (n * r * r * r);
                    acc_with(&mut grads, *x, tx.shape(), |d| {
                        for (j, o) in d.iter_mut().enumerate() {
                            *o += g.data()[j] * tg.data()[j] / r - tx.data()[j] * k;
                        }
                    });
                    acc_with(&mut grads, *gain, tg.shape(), |d| {
                        for (j, o) in d.iter_mut().enumerate() {
                            *o += g.data()[j] * tx.data()[j] / r;
                        }
                    });
                }
                Op::LayerNorm { x, gain, bias } => {
                    let (tx, tg, tb) = (self.value(*x), self.value(*gain), self.value(*bias));
                    let n = tx.len() as f64;
                    let (mu, s) = mean_std(tx.data());
                    let xhat: Vec<f64> = tx.data().iter().map(|v| (v - mu) / s).collect();
                    let dxhat: Vec<f64> = g.data().iter().zip(tg.data()).map(|(a, b)| a * b).collect();
                    let mean_d = dxhat.iter().sum::<f64>() / n;
                    let mean_dx = dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / n;
                    acc_with(&mut grads, *x, tx.shape(), |d| {
                        for (j, o) in d.iter_mut().enumerate() {
                            *o += (dxhat[j] - mean_d - xhat[j] * mean_dx) / s;
                        }
                    });
                    acc_with(&mut grads, *gain, tg.shape(), |d| {
                        for (j, o) in d.iter_mut().enumerate() {
                            *o += g.data()[j] * xhat[j];
                        }
                    });
                    acc_with(&mut grads, *bias, tb.shape(), |d| {
                        for (o, gv) in d.iter_mut().zip(g.data()) {
                            *o += gv;
                        }
                    });
                }
            }
        }

        let mut out = vec![None; self.store.len()];
        for (id, var) in self.param_vars.iter().enumerate() {
            if let Some(v) = var {
                out[id] = grads[v.0].take();
            }
        }
        Gradients::from_vec(out)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64 + NORM_EPS).sqrt()
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mu = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
    (mu, (var + NORM_EPS).sqrt())
}

fn acc_with(grads: &mut [Option<Tensor>], v: Var, shape: &[usize], f: impl FnOnce(&mut [f64])) {
    let slot = grads[v.0].get_or_insert_with(|| Tensor::zeros(shape));
    f(slot.data_mut());
}

fn acc(grads: &mut [Option<Tensor>], v: Var, g: &Tensor) {
    match &mut grads[v.0] {
        Some(t) => t.add_assign(g),
        slot @ None => *slot = Some(g.clone()),
    }
}

fn acc_map(grads: &mut [Option<Tensor>], v: Var, g: &Tensor, f: impl Fn(f64) -> f64) {
    acc_with(grads, v, g.shape(), |d| {
        for (o, gv) in d.iter_mut().zip(g.data()) {
            *o += f(*gv);
        }
    });
}

fn acc_zip(grads: &mut [Option<Tensor>], v: Var, g: &Tensor, other: &Tensor, f: impl Fn(f64, f64) -> f64) {
    acc_with(grads, v, g.shape(), |d| {
        for ((o, gv), ov) in d.iter_mut().zip(g.data()).zip(other.data()) {
            *o += f(*gv, *ov);
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_param_gradient_accumulates() {
        let mut store = ParamStore::new();
        let w = store.add("w", Tensor::vector(vec![3.0]));
        let mut g = Graph::new(&store);
        let a = g.param(w);
        let b = g.param(w);
        assert_eq!(a, b);
        let sq = g.mul(a, b);
        let loss = g.sum(sq);
        assert_eq!(g.scalar(loss), 9.0);
        assert_eq!(g.backward(loss).get(w).unwrap().data(), &[6.0]);
    }

    #[test]
    fn unused_param_has_no_gradient() {
        let mut store = ParamStore::new();
        let used = store.add("used", Tensor::vector(vec![1.0, 2.0]));
        let unused = store.add("unused", Tensor::vector(vec![1.0]));
        let mut g = Graph::new(&store);
        let u = g.param(used);
        let loss = g.sum(u);
        let grads = g.backward(loss);
        assert!(grads.get(unused).is_none());
        assert_eq!(grads.get(used).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn causal_softmax_masks_future() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.input(Tensor::matrix(3, 3, vec![0.0; 9]).unwrap());
        let y = g.causal_softmax(x);
        let t = g.value(y);
        assert_eq!(t.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(t.row(1), &[0.5, 0.5, 0.0]);
        for r in 0..3 {
            assert!((t.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dropout_is_identity_in_eval() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let x = g.input_vector(vec![1.0, 2.0, 3.0]);
        assert_eq!(g.dropout(x, 0.5), x);

        let mut t1 = Graph::training(&store, 9);
        let x1 = t1.input_vector(vec![1.0; 64]);
        let y1 = t1.dropout(x1, 0.5);
        let mut t2 = Graph::training(&store, 9);
        let x2 = t2.input_vector(vec![1.0; 64]);
        let y2 = t2.dropout(x2, 0.5);
        assert_eq!(t1.value(y1), t2.value(y2));
        assert!(t1.value(y1).data().iter().all(|v| *v == 0.0 || *v == 2.0));
    }
}
