//! Reduced temporal fusion transformer: static company context, per-step
//! variable selection, LSTM encoder, static enrichment, causal attention read
//! out at the last position, position-wise GRN and a direct multi-horizon
//! affine head.

use rand::Rng;

use super::features::KNOWN_FUTURE_WIDTH;
use super::windows::WindowSample;
use crate::error::{Error, Result};
use crate::nn::{
    FeedForwardKind, Graph, Grn, GrnConfig, GrnHidden, Init, Linear, Lstm, MultiHeadAttention, Norm, NormType, ParamId,
    ParamStore, Var, VariableSelection,
};

#[derive(Debug, Clone, PartialEq)]
pub struct TftLiteConfig {
    pub n_companies: usize,
    pub n_features: usize,
    pub lookback: usize,
    pub horizon: usize,
    pub hidden: usize,
    pub lstm_layers: usize,
    pub n_heads: usize,
    pub feed_forward: FeedForwardKind,
    pub dropout: f64,
    pub hidden_continuous: usize,
    pub norm: NormType,
}

/// `norm(skip + dropout(GLU(W x + b)))`.
#[derive(Debug, Clone)]
struct GateAddNorm {
    gate: Linear,
    norm: Norm,
    dim: usize,
}

impl GateAddNorm {
    fn new<R: Rng>(store: &mut ParamStore, name: &str, dim: usize, norm: NormType, rng: &mut R) -> Self {
        Self {
            gate: Linear::new(store, &format!("{name}.gate"), dim, 2 * dim, true, rng),
            norm: Norm::new(store, &format!("{name}.norm"), dim, norm, rng),
            dim,
        }
    }

    fn forward(&self, g: &mut Graph, x: Var, skip: Var, dropout: f64) -> Var {
        let proj = self.gate.forward(g, x);
        let u = g.slice(proj, 0, self.dim);
        let v = g.slice(proj, self.dim, self.dim);
        let sv = g.sigmoid(v);
        let gated = g.mul(u, sv);
        let gated = g.dropout(gated, dropout);
        let sum = g.add(skip, gated);
        self.norm.forward(g, sum)
    }
}

#[derive(Debug, Clone)]
pub struct TftLite {
    cfg: TftLiteConfig,
    company_embedding: ParamId,
    static_selection: Grn,
    static_enrichment: Grn,
    static_h: Grn,
    static_c: Grn,
    projections: Vec<Linear>,
    selection: VariableSelection,
    lstm: Lstm,
    post_lstm: GateAddNorm,
    enrichment: Grn,
    attention: MultiHeadAttention,
    post_attention: GateAddNorm,
    positionwise: Grn,
    head: Linear,
}

impl TftLite {
    pub fn new<R: Rng>(store: &mut ParamStore, cfg: TftLiteConfig, rng: &mut R) -> Result<Self> {
        if cfg.n_companies == 0 || cfg.n_features == 0 || cfg.lookback == 0 || cfg.horizon == 0 {
            return Err(Error::Config(format!("degenerate TFT-lite dimensions: {cfg:?}")));
        }
        let h = cfg.hidden;
        let elu = |input_dim, context_dim| GrnConfig {
            input_dim,
            hidden_dim: h,
            output_dim: h,
            context_dim,
            hidden: GrnHidden::Elu,
            norm: cfg.norm,
            dropout: cfg.dropout,
        };
        let company_embedding = store.init("tft.company_embedding", &[cfg.n_companies, h], Init::Uniform(1.0), rng);
        let static_selection = Grn::new(store, "tft.static_selection", elu(h, None), rng);
        let static_enrichment = Grn::new(store, "tft.static_enrichment", elu(h, None), rng);
        let static_h = Grn::new(store, "tft.static_h", elu(h, None), rng);
        let static_c = Grn::new(store, "tft.static_c", elu(h, None), rng);
        let projections = (0..cfg.n_features)
            .map(|f| Linear::new(store, &format!("tft.project{f}"), 1, cfg.hidden_continuous, true, rng))
            .collect();
        let selection = VariableSelection::new(
            store,
            "tft.selection",
            cfg.n_features,
            cfg.hidden_continuous,
            h,
            Some(h),
            cfg.norm,
            cfg.dropout,
            rng,
        )?;
        let lstm = Lstm::new(store, "tft.lstm", h, h, cfg.lstm_layers, rng);
        let post_lstm = GateAddNorm::new(store, "tft.post_lstm", h, cfg.norm, rng);
        let enrichment = Grn::new(store, "tft.enrichment", elu(h, Some(h)), rng);
        let attention = MultiHeadAttention::new(store, "tft.attention", h, cfg.n_heads, rng)?;
        let post_attention = GateAddNorm::new(store, "tft.post_attention", h, cfg.norm, rng);
        let positionwise = Grn::new(
            store,
            "tft.positionwise",
            GrnConfig {
                hidden: GrnHidden::FeedForward(cfg.feed_forward),
                ..elu(h, None)
            },
            rng,
        );
        let head = Linear::new(store, "tft.head", h + cfg.horizon * KNOWN_FUTURE_WIDTH, cfg.horizon, true, rng);
        Ok(Self {
            cfg,
            company_embedding,
            static_selection,
            static_enrichment,
            static_h,
            static_c,
            projections,
            selection,
            lstm,
            post_lstm,
            enrichment,
            attention,
            post_attention,
            positionwise,
            head,
        })
    }

    pub fn config(&self) -> &TftLiteConfig {
        &self.cfg
    }

    fn check(&self, s: &WindowSample) -> Result<()> {
        let c = &self.cfg;
        if s.company >= c.n_companies {
            return Err(Error::Config(format!("company index {} outside 0..{}", s.company, c.n_companies)));
        }
        if s.past.shape() != [c.lookback, c.n_features] {
            return Err(Error::Config(format!(
                "past window is {:?}, model expects [{}, {}]",
                s.past.shape(),
                c.lookback,
                c.n_features
            )));
        }
        if s.known_future.shape() != [c.horizon, KNOWN_FUTURE_WIDTH] {
            return Err(Error::Config(format!(
                "known-future block is {:?}, model expects [{}, {KNOWN_FUTURE_WIDTH}]",
                s.known_future.shape(),
                c.horizon
            )));
        }
        Ok(())
    }

    /// Normalized close forecast of length `horizon`.
    pub fn forward(&self, g: &mut Graph, sample: &WindowSample) -> Result<Var> {
        self.check(sample)?;
        let c = &self.cfg;
        let table = g.param(self.company_embedding);
        let company = g.row(table, sample.company);
        let ctx_select = self.static_selection.forward(g, company, None)?;
        let ctx_enrich = self.static_enrichment.forward(g, company, None)?;
        let h0 = self.static_h.forward(g, company, None)?;
        let c0 = self.static_c.forward(g, company, None)?;

        let mut selected = Vec::with_capacity(c.lookback);
        for t in 0..c.lookback {
            let row = sample.past.row(t);
            let vars = self
                .projections
                .iter()
                .zip(row)
                .map(|(p, &x)| {
                    let xv = g.input_vector(vec![x]);
                    p.forward(g, xv)
                })
                .collect::<Vec<_>>();
            let (combined, _) = self.selection.forward(g, &vars, Some(ctx_select))?;
            selected.push(combined);
        }

        let encoded = self.lstm.forward(g, &selected, h0, c0)?;
        let mut enriched = Vec::with_capacity(c.lookback);
        for (&e, &x) in encoded.iter().zip(&selected) {
            let phi = self.post_lstm.forward(g, e, x, c.dropout);
            enriched.push(self.enrichment.forward(g, phi, Some(ctx_enrich))?);
        }

        let keys = g.stack(&enriched);
        let last = enriched[c.lookback - 1];
        let query = g.stack(&[last]);
        let attended = self.attention.forward(g, query, keys, keys, true)?;
        let attended = g.row(attended, 0);
        let delta = self.post_attention.forward(g, attended, last, c.dropout);
        let psi = self.positionwise.forward(g, delta, None)?;

        let future = g.input_vector(sample.known_future.data().to_vec());
        let head_in = g.concat(&[psi, future]);
        Ok(self.head.forward(g, head_in))
    }
}
