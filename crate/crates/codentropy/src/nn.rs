//! From-scratch dense LSTM kernel in 64-bit floats: learned byte embeddings,
//! stacked LSTM layers, output projection, stable softmax, full forward pass
//! and hand-derived backpropagation through time.
//!
//! All parameters live in one flat `Vec<f64>` with a computed layout, which
//! keeps the optimizer, gradient clipping, checkpointing and finite-difference
//! checking trivial. The vanilla tanh RNN is recoverable as a degenerate gate
//! configuration (input gate forced open, forget gate forced shut); a unit
//! test pins that reduction but it is not a supported configuration.

use std::ops::Range;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lm::{LanguageModel, PredictiveDistribution, TokenId};

pub const WEIGHT_INIT_RANGE: f64 = 0.08;
pub const FORGET_BIAS_INIT: f64 = 1.0;

/// Architecture and training-window shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub bptt_len: usize,
    pub rng_seed: u64,
}

impl ModelConfig {
    /// Defaults: 64-d embeddings, 128 cells, 2 layers, 50-token windows.
    pub fn new(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            embed_dim: 64,
            hidden_dim: 128,
            num_layers: 2,
            bptt_len: 50,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("num_layers", self.num_layers),
            ("bptt_len", self.bptt_len),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }

    /// Input width of a layer: embeddings feed layer 0, hidden vectors feed
    /// the layers above.
    pub fn layer_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.embed_dim
        } else {
            self.hidden_dim
        }
    }
}

/// Gate index into per-layer weight groups. Order is fixed and also the
/// serialization order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Cell = 3,
}

pub const GATES: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Cell];

impl Gate {
    pub fn name(self) -> &'static str {
        match self {
            Gate::Input => "i",
            Gate::Forget => "f",
            Gate::Output => "o",
            Gate::Cell => "g",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LayerRanges {
    w: [Range<usize>; 4],
    u: [Range<usize>; 4],
    b: [Range<usize>; 4],
    input_dim: usize,
}

/// Offsets of every parameter array inside the flat buffer, in declared
/// order: embedding, then per layer W_i..W_g, U_i..U_g, b_i..b_g, then the
/// output projection and output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    embedding: Range<usize>,
    layers: Vec<LayerRanges>,
    out_proj: Range<usize>,
    out_bias: Range<usize>,
    total: usize,
}

impl ParamLayout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut off = 0usize;
        let mut take = |n: usize| {
            let r = off..off + n;
            off += n;
            r
        };
        let embedding = take(cfg.vocab_size * cfg.embed_dim);
        let h = cfg.hidden_dim;
        let mut layers = Vec::with_capacity(cfg.num_layers);
        for l in 0..cfg.num_layers {
            let input_dim = cfg.layer_input_dim(l);
            let w = [
                take(h * input_dim),
                take(h * input_dim),
                take(h * input_dim),
                take(h * input_dim),
            ];
            let u = [take(h * h), take(h * h), take(h * h), take(h * h)];
            let b = [take(h), take(h), take(h), take(h)];
            layers.push(LayerRanges { w, u, b, input_dim });
        }
        let out_proj = take(cfg.vocab_size * h);
        let out_bias = take(cfg.vocab_size);
        ParamLayout {
            embedding,
            layers,
            out_proj,
            out_bias,
            total: off,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

/// All learned weights, flat.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    config: ModelConfig,
    layout: ParamLayout,
    data: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let data = vec![0.0; layout.total];
        Ok(Self {
            config,
            layout,
            data,
        })
    }

    /// Rebuild from a flat buffer (checkpoint loading). The buffer length
    /// must match the layout exactly.
    pub fn from_flat(config: ModelConfig, data: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        if data.len() != layout.total {
            return Err(Error::ShapeMismatch(format!(
                "parameter buffer has {} entries, layout needs {}",
                data.len(),
                layout.total
            )));
        }
        Ok(Self {
            config,
            layout,
            data,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn embedding(&self) -> &[f64] {
        &self.data[self.layout.embedding.clone()]
    }

    pub fn embedding_row(&self, token: TokenId) -> &[f64] {
        let e = self.config.embed_dim;
        let start = self.layout.embedding.start + token as usize * e;
        &self.data[start..start + e]
    }

    pub fn w(&self, layer: usize, gate: Gate) -> &[f64] {
        &self.data[self.layout.layers[layer].w[gate as usize].clone()]
    }

    pub fn u(&self, layer: usize, gate: Gate) -> &[f64] {
        &self.data[self.layout.layers[layer].u[gate as usize].clone()]
    }

    pub fn b(&self, layer: usize, gate: Gate) -> &[f64] {
        &self.data[self.layout.layers[layer].b[gate as usize].clone()]
    }

    pub fn b_mut(&mut self, layer: usize, gate: Gate) -> &mut [f64] {
        let r = self.layout.layers[layer].b[gate as usize].clone();
        &mut self.data[r]
    }

    pub fn w_mut(&mut self, layer: usize, gate: Gate) -> &mut [f64] {
        let r = self.layout.layers[layer].w[gate as usize].clone();
        &mut self.data[r]
    }

    pub fn u_mut(&mut self, layer: usize, gate: Gate) -> &mut [f64] {
        let r = self.layout.layers[layer].u[gate as usize].clone();
        &mut self.data[r]
    }

    pub fn out_proj(&self) -> &[f64] {
        &self.data[self.layout.out_proj.clone()]
    }

    pub fn out_bias(&self) -> &[f64] {
        &self.data[self.layout.out_bias.clone()]
    }

    /// Logits for the next token from a top-layer hidden vector.
    pub fn project(&self, h_top: &[f64]) -> Vec<f64> {
        let v = self.config.vocab_size;
        let h = self.config.hidden_dim;
        let mut logits = self.out_bias().to_vec();
        matvec_add(self.out_proj(), v, h, h_top, &mut logits);
        logits
    }
}

/// Weights uniform in [-0.08, 0.08] from the seeded generator; biases zero
/// except the forget-gate biases, which start at 1.0 so the cell initially
/// retains memory.
pub fn init_params(config: &ModelConfig) -> Result<LstmParams> {
    config.validate()?;
    let mut params = LstmParams::zeros(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let dist = Uniform::new_inclusive(-WEIGHT_INIT_RANGE, WEIGHT_INIT_RANGE);

    let mut weight_ranges: Vec<Range<usize>> = vec![params.layout.embedding.clone()];
    for l in &params.layout.layers {
        for g in 0..4 {
            weight_ranges.push(l.w[g].clone());
        }
        for g in 0..4 {
            weight_ranges.push(l.u[g].clone());
        }
    }
    weight_ranges.push(params.layout.out_proj.clone());
    for range in weight_ranges {
        for x in &mut params.data[range] {
            *x = dist.sample(&mut rng);
        }
    }
    for layer in 0..config.num_layers {
        for x in params.b_mut(layer, Gate::Forget) {
            *x = FORGET_BIAS_INIT;
        }
    }
    Ok(params)
}

/// The recurrent carry: one hidden and one cell vector per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl LstmState {
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            h: vec![vec![0.0; config.hidden_dim]; config.num_layers],
            c: vec![vec![0.0; config.hidden_dim]; config.num_layers],
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// out += A x for row-major A (rows x cols).
pub(crate) fn matvec_add(a: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for (r, o) in out.iter_mut().enumerate() {
        let row = &a[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (w, xv) in row.iter().zip(x) {
            acc += w * xv;
        }
        *o += acc;
    }
}

/// out += A^T y for row-major A (rows x cols).
pub(crate) fn matvec_t_add(a: &[f64], rows: usize, cols: usize, y: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), rows * cols);
    debug_assert_eq!(y.len(), rows);
    debug_assert_eq!(out.len(), cols);
    for r in 0..rows {
        let yr = y[r];
        if yr == 0.0 {
            continue;
        }
        let row = &a[r * cols..(r + 1) * cols];
        for (o, w) in out.iter_mut().zip(row) {
            *o += w * yr;
        }
    }
}

/// dA += dy (outer) x for row-major dA (len(dy) x len(x)).
pub(crate) fn outer_add(dy: &[f64], x: &[f64], da: &mut [f64]) {
    debug_assert_eq!(da.len(), dy.len() * x.len());
    let cols = x.len();
    for (r, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let row = &mut da[r * cols..(r + 1) * cols];
        for (o, xv) in row.iter_mut().zip(x) {
            *o += d * xv;
        }
    }
}

fn check_finite(values: &[f64], layer: usize, what: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric {
            context: format!("layer {layer} {what}"),
        });
    }
    Ok(())
}

/// One cell update for one layer. Gate values, the new cell, tanh(cell) and
/// the new hidden vector are written into the provided slices.
#[allow(clippy::too_many_arguments)]
fn layer_step(
    params: &LstmParams,
    layer: usize,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    out_i: &mut [f64],
    out_f: &mut [f64],
    out_o: &mut [f64],
    out_g: &mut [f64],
    out_c: &mut [f64],
    out_tc: &mut [f64],
    out_h: &mut [f64],
) -> Result<()> {
    let h = params.config.hidden_dim;
    let in_dim = params.layout.layers[layer].input_dim;
    for (gate, out) in [
        (Gate::Input, &mut *out_i),
        (Gate::Forget, &mut *out_f),
        (Gate::Output, &mut *out_o),
        (Gate::Cell, &mut *out_g),
    ] {
        out.copy_from_slice(params.b(layer, gate));
        matvec_add(params.w(layer, gate), h, in_dim, x, out);
        matvec_add(params.u(layer, gate), h, h, h_prev, out);
        if gate == Gate::Cell {
            for v in out.iter_mut() {
                *v = v.tanh();
            }
        } else {
            for v in out.iter_mut() {
                *v = sigmoid(*v);
            }
        }
        check_finite(out, layer, &format!("gate {}", gate.name()))?;
    }
    for j in 0..h {
        out_c[j] = out_f[j] * c_prev[j] + out_i[j] * out_g[j];
        out_tc[j] = out_c[j].tanh();
        out_h[j] = out_o[j] * out_tc[j];
    }
    check_finite(out_c, layer, "cell")?;
    check_finite(out_h, layer, "hidden")?;
    Ok(())
}

/// Advance the stacked cell by one input vector. The state is updated in
/// place; the topmost layer's new hidden vector is returned.
pub fn lstm_step(params: &LstmParams, state: &mut LstmState, input: &[f64]) -> Result<Vec<f64>> {
    let cfg = &params.config;
    if input.len() != cfg.embed_dim {
        return Err(Error::ShapeMismatch(format!(
            "input vector has {} entries, embed_dim is {}",
            input.len(),
            cfg.embed_dim
        )));
    }
    let h = cfg.hidden_dim;
    let mut gi = vec![0.0; h];
    let mut gf = vec![0.0; h];
    let mut go = vec![0.0; h];
    let mut gg = vec![0.0; h];
    let mut nc = vec![0.0; h];
    let mut tc = vec![0.0; h];
    let mut nh = vec![0.0; h];
    let mut x = input.to_vec();
    for layer in 0..cfg.num_layers {
        layer_step(
            params,
            layer,
            &x,
            &state.h[layer],
            &state.c[layer],
            &mut gi,
            &mut gf,
            &mut go,
            &mut gg,
            &mut nc,
            &mut tc,
            &mut nh,
        )?;
        state.c[layer].copy_from_slice(&nc);
        state.h[layer].copy_from_slice(&nh);
        x.clear();
        x.extend_from_slice(&nh);
    }
    Ok(x)
}

/// Everything the backward pass needs: per layer and per step, the gate
/// activations, cell, tanh(cell) and hidden vectors, plus the softmax
/// outputs and the carry that entered the window.
#[derive(Debug, Clone)]
pub struct Tape {
    tokens: Vec<TokenId>,
    init: LstmState,
    layers: Vec<LayerTape>,
    /// Row-major T x vocab_size softmax outputs.
    probs: Vec<f64>,
}

#[derive(Debug, Clone)]
struct LayerTape {
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    c: Vec<f64>,
    tc: Vec<f64>,
    h: Vec<f64>,
}

impl LayerTape {
    fn new(len: usize) -> Self {
        Self {
            i: vec![0.0; len],
            f: vec![0.0; len],
            o: vec![0.0; len],
            g: vec![0.0; len],
            c: vec![0.0; len],
            tc: vec![0.0; len],
            h: vec![0.0; len],
        }
    }
}

/// Output of a forward pass over one window.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// Distribution over the next token after consuming `tokens[..=t]`.
    pub distributions: Vec<PredictiveDistribution>,
    pub final_state: LstmState,
    pub tape: Tape,
}

impl ForwardPass {
    /// Mean cross-entropy (natural log) of `targets` under the recorded
    /// predictions.
    pub fn mean_cross_entropy_nats(&self, targets: &[TokenId]) -> Result<f64> {
        let t_len = self.tape.tokens.len();
        if targets.len() != t_len {
            return Err(Error::LengthMismatch {
                expected: t_len,
                got: targets.len(),
            });
        }
        let v = self.distributions[0].len();
        let mut total = 0.0;
        for (t, &target) in targets.iter().enumerate() {
            if (target as usize) >= v {
                return Err(Error::TokenOutOfRange {
                    id: target as usize,
                    vocab_size: v,
                });
            }
            total -= self.tape.probs[t * v + target as usize].ln();
        }
        Ok(total / t_len as f64)
    }
}

/// Run the stacked cell over a token window, recording the tape.
///
/// For each position `t` the returned distribution predicts the token at
/// `t + 1`, conditioned on everything up to and including `t`.
pub fn forward(params: &LstmParams, state: &LstmState, tokens: &[TokenId]) -> Result<ForwardPass> {
    let cfg = &params.config;
    if tokens.is_empty() {
        return Err(Error::EmptyInput("forward over empty token window".into()));
    }
    for &tok in tokens {
        if (tok as usize) >= cfg.vocab_size {
            return Err(Error::TokenOutOfRange {
                id: tok as usize,
                vocab_size: cfg.vocab_size,
            });
        }
    }
    let t_len = tokens.len();
    let h = cfg.hidden_dim;
    let v = cfg.vocab_size;
    let mut layers: Vec<LayerTape> = (0..cfg.num_layers).map(|_| LayerTape::new(t_len * h)).collect();
    let mut probs = vec![0.0; t_len * v];
    let mut distributions = Vec::with_capacity(t_len);
    let mut work = state.clone();
    let mut x = vec![0.0; cfg.embed_dim.max(h)];

    for (t, &tok) in tokens.iter().enumerate() {
        let mut x_len = cfg.embed_dim;
        x[..x_len].copy_from_slice(params.embedding_row(tok));
        for (layer, lt) in layers.iter_mut().enumerate() {
            let span = t * h..(t + 1) * h;
            // Carve out this step's slices; split to keep the borrows disjoint.
            let (i_s, f_s, o_s, g_s, c_s, tc_s, h_s) = (
                &mut lt.i[span.clone()],
                &mut lt.f[span.clone()],
                &mut lt.o[span.clone()],
                &mut lt.g[span.clone()],
                &mut lt.c[span.clone()],
                &mut lt.tc[span.clone()],
                &mut lt.h[span.clone()],
            );
            layer_step(
                params,
                layer,
                &x[..x_len],
                &work.h[layer],
                &work.c[layer],
                i_s,
                f_s,
                o_s,
                g_s,
                c_s,
                tc_s,
                h_s,
            )?;
            work.c[layer].copy_from_slice(c_s);
            work.h[layer].copy_from_slice(h_s);
            x_len = h;
            x[..h].copy_from_slice(h_s);
        }
        let logits = params.project(&work.h[cfg.num_layers - 1]);
        let dist = PredictiveDistribution::from_logits(&logits);
        probs[t * v..(t + 1) * v].copy_from_slice(dist.probs());
        distributions.push(dist);
    }

    Ok(ForwardPass {
        distributions,
        final_state: work,
        tape: Tape {
            tokens: tokens.to_vec(),
            init: state.clone(),
            layers,
            probs,
        },
    })
}

/// Gradients of mean per-token cross-entropy: one flat buffer in parameter
/// layout, plus the gradient with respect to the carry that entered the
/// window (not used by truncated training, but exposed and checked).
#[derive(Debug, Clone)]
pub struct LstmGradients {
    layout: ParamLayout,
    data: Vec<f64>,
    pub carry_h: Vec<Vec<f64>>,
    pub carry_c: Vec<Vec<f64>>,
}

impl LstmGradients {
    fn zeros(params: &LstmParams) -> Self {
        Self {
            layout: params.layout.clone(),
            data: vec![0.0; params.layout.total],
            carry_h: vec![vec![0.0; params.config.hidden_dim]; params.config.num_layers],
            carry_c: vec![vec![0.0; params.config.hidden_dim]; params.config.num_layers],
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn embedding(&self) -> &[f64] {
        &self.data[self.layout.embedding.clone()]
    }

    pub fn w(&self, layer: usize, gate: Gate) -> &[f64] {
        &self.data[self.layout.layers[layer].w[gate as usize].clone()]
    }

    pub fn u(&self, layer: usize, gate: Gate) -> &[f64] {
        &self.data[self.layout.layers[layer].u[gate as usize].clone()]
    }

    pub fn b(&self, layer: usize, gate: Gate) -> &[f64] {
        &self.data[self.layout.layers[layer].b[gate as usize].clone()]
    }

    pub fn out_proj(&self) -> &[f64] {
        &self.data[self.layout.out_proj.clone()]
    }

    pub fn out_bias(&self) -> &[f64] {
        &self.data[self.layout.out_bias.clone()]
    }

    /// Accumulate another gradient set (used to sum over batch lanes).
    pub fn add_assign(&mut self, other: &LstmGradients) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        for (a, b) in self.carry_h.iter_mut().zip(&other.carry_h) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.carry_c.iter_mut().zip(&other.carry_c) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for x in &mut self.data {
            *x *= k;
        }
        for v in self.carry_h.iter_mut().chain(self.carry_c.iter_mut()) {
            for x in v {
                *x *= k;
            }
        }
    }
}

/// Exact gradients of mean per-token cross-entropy (natural log) over the
/// window recorded in `tape`, with respect to every parameter and the
/// incoming carry. `targets[t]` is the token the position-`t` distribution
/// should have predicted.
pub fn backward(params: &LstmParams, tape: &Tape, targets: &[TokenId]) -> Result<LstmGradients> {
    let cfg = &params.config;
    let t_len = tape.tokens.len();
    if targets.len() != t_len {
        return Err(Error::LengthMismatch {
            expected: t_len,
            got: targets.len(),
        });
    }
    let h = cfg.hidden_dim;
    let v = cfg.vocab_size;
    let n_layers = cfg.num_layers;
    let top = n_layers - 1;
    let inv_t = 1.0 / t_len as f64;
    let mut grads = LstmGradients::zeros(params);

    // Output projection, and dL/dh contributions into the top layer.
    let mut dh_above = vec![0.0; t_len * h];
    {
        let mut dy = vec![0.0; v];
        for (t, &target) in targets.iter().enumerate() {
            if (target as usize) >= v {
                return Err(Error::TokenOutOfRange {
                    id: target as usize,
                    vocab_size: v,
                });
            }
            let p = &tape.probs[t * v..(t + 1) * v];
            for (d, &pv) in dy.iter_mut().zip(p) {
                *d = pv * inv_t;
            }
            dy[target as usize] -= inv_t;
            let h_top = &tape.layers[top].h[t * h..(t + 1) * h];
            outer_add(&dy, h_top, &mut grads.data[params.layout.out_proj.clone()]);
            for (o, &d) in grads.data[params.layout.out_bias.clone()].iter_mut().zip(&dy) {
                *o += d;
            }
            matvec_t_add(
                params.out_proj(),
                v,
                h,
                &dy,
                &mut dh_above[t * h..(t + 1) * h],
            );
        }
    }

    let mut da = [vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]];
    let mut dh = vec![0.0; h];
    let mut dc = vec![0.0; h];

    for layer in (0..n_layers).rev() {
        let in_dim = params.layout.layers[layer].input_dim;
        let lt = &tape.layers[layer];
        let mut dx_below = vec![0.0; t_len * in_dim];
        let mut dh_rec = vec![0.0; h];
        let mut dc_rec = vec![0.0; h];

        for t in (0..t_len).rev() {
            let span = t * h..(t + 1) * h;
            let (gi, gf, go, gg) = (
                &lt.i[span.clone()],
                &lt.f[span.clone()],
                &lt.o[span.clone()],
                &lt.g[span.clone()],
            );
            let tc = &lt.tc[span.clone()];
            let (h_prev, c_prev): (&[f64], &[f64]) = if t == 0 {
                (&tape.init.h[layer], &tape.init.c[layer])
            } else {
                let prev = (t - 1) * h..t * h;
                (&lt.h[prev.clone()], &lt.c[prev])
            };

            for j in 0..h {
                dh[j] = dh_above[t * h + j] + dh_rec[j];
                let d_o = dh[j] * tc[j];
                da[Gate::Output as usize][j] = d_o * go[j] * (1.0 - go[j]);
                dc[j] = dh[j] * go[j] * (1.0 - tc[j] * tc[j]) + dc_rec[j];
                let d_i = dc[j] * gg[j];
                da[Gate::Input as usize][j] = d_i * gi[j] * (1.0 - gi[j]);
                let d_g = dc[j] * gi[j];
                da[Gate::Cell as usize][j] = d_g * (1.0 - gg[j] * gg[j]);
                let d_f = dc[j] * c_prev[j];
                da[Gate::Forget as usize][j] = d_f * gf[j] * (1.0 - gf[j]);
                dc_rec[j] = dc[j] * gf[j];
            }

            let x: &[f64] = if layer == 0 {
                params.embedding_row(tape.tokens[t])
            } else {
                &tape.layers[layer - 1].h[span.clone()]
            };

            dh_rec.iter_mut().for_each(|d| *d = 0.0);
            let dx = &mut dx_below[t * in_dim..(t + 1) * in_dim];
            for gate in GATES {
                let dag = &da[gate as usize];
                let lr = &params.layout.layers[layer];
                outer_add(dag, x, &mut grads.data[lr.w[gate as usize].clone()]);
                outer_add(dag, h_prev, &mut grads.data[lr.u[gate as usize].clone()]);
                for (o, &d) in grads.data[lr.b[gate as usize].clone()].iter_mut().zip(dag) {
                    *o += d;
                }
                matvec_t_add(params.u(layer, gate), h, h, dag, &mut dh_rec);
                matvec_t_add(params.w(layer, gate), h, in_dim, dag, dx);
            }
        }

        grads.carry_h[layer].copy_from_slice(&dh_rec);
        grads.carry_c[layer].copy_from_slice(&dc_rec);

        if layer == 0 {
            let e = cfg.embed_dim;
            for (t, &tok) in tape.tokens.iter().enumerate() {
                let row = params.layout.embedding.start + tok as usize * e;
                for j in 0..e {
                    grads.data[row + j] += dx_below[t * e + j];
                }
            }
        } else {
            dh_above = dx_below;
        }
    }

    Ok(grads)
}

/// Compare `backward`'s parameter gradients against central finite
/// differences of the forward loss, entry by entry.
///
/// Returns the worst relative error, with the denominator floored at 1e-5:
/// gradients below that magnitude sit at the finite-difference noise floor
/// (~1e-11 for f64 at step 1e-5) and are effectively compared absolutely.
pub fn finite_difference_check(
    params: &mut LstmParams,
    state: &LstmState,
    tokens: &[TokenId],
    targets: &[TokenId],
    step: f64,
) -> Result<f64> {
    let grads = {
        let fwd = forward(params, state, tokens)?;
        backward(params, &fwd.tape, targets)?
    };
    let loss = |p: &LstmParams| -> Result<f64> {
        forward(p, state, tokens)?.mean_cross_entropy_nats(targets)
    };
    let mut worst = 0.0f64;
    for j in 0..params.data().len() {
        let orig = params.data()[j];
        params.data_mut()[j] = orig + step;
        let up = loss(params)?;
        params.data_mut()[j] = orig - step;
        let down = loss(params)?;
        params.data_mut()[j] = orig;
        let fd = (up - down) / (2.0 * step);
        let g = grads.data()[j];
        let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-5);
        worst = worst.max(rel);
    }
    Ok(worst)
}

impl LanguageModel for LstmParams {
    fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn scan(
        &self,
        ids: &[TokenId],
        visit: &mut dyn FnMut(usize, &PredictiveDistribution),
    ) -> Result<()> {
        let mut state = LstmState::zeros(&self.config);
        for (t, &tok) in ids.iter().enumerate() {
            if (tok as usize) >= self.config.vocab_size {
                return Err(Error::TokenOutOfRange {
                    id: tok as usize,
                    vocab_size: self.config.vocab_size,
                });
            }
            let h_top = lstm_step(self, &mut state, self.embedding_row(tok))?;
            let dist = PredictiveDistribution::from_logits(&self.project(&h_top));
            visit(t, &dist);
        }
        Ok(())
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn tiny_config(vocab: usize, embed: usize, hidden: usize, layers: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            vocab_size: vocab,
            embed_dim: embed,
            hidden_dim: hidden,
            num_layers: layers,
            bptt_len: 50,
            rng_seed: seed,
        }
    }

    /// Straight-line scalar re-implementation of the six cell equations and
    /// the softmax output, kept deliberately free of the shared matrix
    /// helpers. The vectorized kernel is checked against this.
    fn scalar_forward(
        params: &LstmParams,
        state: &LstmState,
        tokens: &[TokenId],
    ) -> (Vec<Vec<f64>>, LstmState) {
        let cfg = params.config();
        let hd = cfg.hidden_dim;
        let mut st = state.clone();
        let mut all_probs = Vec::new();
        for &tok in tokens {
            let mut x: Vec<f64> = params.embedding_row(tok).to_vec();
            for l in 0..cfg.num_layers {
                let in_dim = cfg.layer_input_dim(l);
                let mut new_h = vec![0.0; hd];
                let mut new_c = vec![0.0; hd];
                for j in 0..hd {
                    let mut a_i = params.b(l, Gate::Input)[j];
                    let mut a_f = params.b(l, Gate::Forget)[j];
                    let mut a_o = params.b(l, Gate::Output)[j];
                    let mut a_g = params.b(l, Gate::Cell)[j];
                    for k in 0..in_dim {
                        a_i += params.w(l, Gate::Input)[j * in_dim + k] * x[k];
                        a_f += params.w(l, Gate::Forget)[j * in_dim + k] * x[k];
                        a_o += params.w(l, Gate::Output)[j * in_dim + k] * x[k];
                        a_g += params.w(l, Gate::Cell)[j * in_dim + k] * x[k];
                    }
                    for k in 0..hd {
                        a_i += params.u(l, Gate::Input)[j * hd + k] * st.h[l][k];
                        a_f += params.u(l, Gate::Forget)[j * hd + k] * st.h[l][k];
                        a_o += params.u(l, Gate::Output)[j * hd + k] * st.h[l][k];
                        a_g += params.u(l, Gate::Cell)[j * hd + k] * st.h[l][k];
                    }
                    let i_t = 1.0 / (1.0 + (-a_i).exp());
                    let f_t = 1.0 / (1.0 + (-a_f).exp());
                    let o_t = 1.0 / (1.0 + (-a_o).exp());
                    let g_t = a_g.tanh();
                    let c_t = f_t * st.c[l][j] + i_t * g_t;
                    new_c[j] = c_t;
                    new_h[j] = o_t * c_t.tanh();
                }
                st.h[l] = new_h.clone();
                st.c[l] = new_c;
                x = new_h;
            }
            let mut logits = vec![0.0; cfg.vocab_size];
            for r in 0..cfg.vocab_size {
                let mut acc = params.out_bias()[r];
                for k in 0..hd {
                    acc += params.out_proj()[r * hd + k] * x[k];
                }
                logits[r] = acc;
            }
            let z: f64 = logits.iter().map(|l| l.exp()).sum();
            all_probs.push(logits.iter().map(|l| l.exp() / z).collect());
        }
        (all_probs, st)
    }

    #[test]
    fn init_is_deterministic_for_fixed_seed() {
        let cfg = tiny_config(10, 4, 8, 2, 42);
        let a = init_params(&cfg).unwrap();
        let b = init_params(&cfg).unwrap();
        assert_eq!(a.data(), b.data());
        let c = init_params(&tiny_config(10, 4, 8, 2, 43)).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn init_shapes_and_values() {
        let cfg = tiny_config(10, 4, 8, 2, 7);
        let p = init_params(&cfg).unwrap();
        assert_eq!(p.w(0, Gate::Input).len(), 8 * 4);
        assert_eq!(p.w(1, Gate::Input).len(), 8 * 8);
        assert_eq!(p.u(0, Gate::Forget).len(), 8 * 8);
        assert_eq!(p.embedding().len(), 10 * 4);
        assert_eq!(p.out_proj().len(), 10 * 8);
        for layer in 0..2 {
            assert!(p.b(layer, Gate::Forget).iter().all(|&x| x == 1.0));
            for gate in [Gate::Input, Gate::Output, Gate::Cell] {
                assert!(p.b(layer, gate).iter().all(|&x| x == 0.0));
            }
            for gate in GATES {
                assert!(p.w(layer, gate).iter().all(|&x| x.abs() <= WEIGHT_INIT_RANGE));
                assert!(p.u(layer, gate).iter().all(|&x| x.abs() <= WEIGHT_INIT_RANGE));
            }
        }
        assert!(p.out_bias().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_params_step_gives_zero_hidden() {
        let cfg = tiny_config(5, 3, 4, 1, 0);
        let p = LstmParams::zeros(cfg.clone()).unwrap();
        let mut state = LstmState::zeros(&cfg);
        let h = lstm_step(&p, &mut state, &[0.3, -0.7, 1.0]).unwrap();
        // sigma(0) = 0.5 and tanh(0) = 0, so c stays 0 and h = 0.5 * tanh(0) = 0.
        assert!(h.iter().all(|&x| x == 0.0));
        assert!(state.c[0].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_params_step_halves_cell() {
        let cfg = tiny_config(5, 3, 4, 1, 0);
        let p = LstmParams::zeros(cfg.clone()).unwrap();
        let mut state = LstmState::zeros(&cfg);
        let v = [0.8, -1.2, 0.4, 2.0];
        state.c[0].copy_from_slice(&v);
        lstm_step(&p, &mut state, &[0.0, 0.0, 0.0]).unwrap();
        for j in 0..4 {
            assert_relative_eq!(state.c[0][j], 0.5 * v[j], max_relative = 1e-15);
            assert_relative_eq!(state.h[0][j], 0.5 * (0.5 * v[j]).tanh(), max_relative = 1e-15);
        }
    }

    #[test]
    fn step_matches_scalar_oracle() {
        let cfg = tiny_config(6, 3, 3, 2, 99);
        let p = init_params(&cfg).unwrap();
        let state = LstmState::zeros(&cfg);
        let tokens = [1u16, 4, 2];
        let (oracle_probs, oracle_state) = scalar_forward(&p, &state, &tokens);
        let fwd = forward(&p, &state, &tokens).unwrap();
        for l in 0..2 {
            for j in 0..3 {
                assert_relative_eq!(fwd.final_state.h[l][j], oracle_state.h[l][j], epsilon = 1e-15);
                assert_relative_eq!(fwd.final_state.c[l][j], oracle_state.c[l][j], epsilon = 1e-15);
            }
        }
        for (t, row) in oracle_probs.iter().enumerate() {
            for (a, b) in fwd.distributions[t].probs().iter().zip(row) {
                assert_relative_eq!(*a, *b, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn forward_matches_scalar_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..20 {
            let cfg = tiny_config(
                rng.gen_range(3..8),
                rng.gen_range(2..5),
                rng.gen_range(2..6),
                rng.gen_range(1..3),
                1000 + trial,
            );
            let p = init_params(&cfg).unwrap();
            let mut state = LstmState::zeros(&cfg);
            for l in 0..cfg.num_layers {
                for j in 0..cfg.hidden_dim {
                    state.h[l][j] = rng.gen_range(-0.5..0.5);
                    state.c[l][j] = rng.gen_range(-0.5..0.5);
                }
            }
            let len = rng.gen_range(1..6);
            let tokens: Vec<TokenId> =
                (0..len).map(|_| rng.gen_range(0..cfg.vocab_size as u16)).collect();
            let (oracle_probs, _) = scalar_forward(&p, &state, &tokens);
            let fwd = forward(&p, &state, &tokens).unwrap();
            for (t, row) in oracle_probs.iter().enumerate() {
                for (a, b) in fwd.distributions[t].probs().iter().zip(row) {
                    assert_relative_eq!(*a, *b, epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn forward_distributions_sum_to_one() {
        let cfg = tiny_config(11, 5, 7, 2, 3);
        let p = init_params(&cfg).unwrap();
        let fwd = forward(&p, &LstmState::zeros(&cfg), &[0, 5, 10, 3]).unwrap();
        for d in &fwd.distributions {
            let s: f64 = d.probs().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_params_give_exactly_uniform_distributions() {
        let cfg = tiny_config(8, 3, 4, 2, 0);
        let p = LstmParams::zeros(cfg.clone()).unwrap();
        let fwd = forward(&p, &LstmState::zeros(&cfg), &[0, 1, 2]).unwrap();
        for d in &fwd.distributions {
            for &pv in d.probs() {
                assert_eq!(pv, 0.125);
            }
        }
    }

    #[test]
    fn forward_rejects_out_of_range_token() {
        let cfg = tiny_config(5, 3, 4, 1, 0);
        let p = init_params(&cfg).unwrap();
        match forward(&p, &LstmState::zeros(&cfg), &[2, 5]) {
            Err(Error::TokenOutOfRange { id: 5, vocab_size: 5 }) => {}
            other => panic!("expected TokenOutOfRange, got {other:?}"),
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let cfg = tiny_config(9, 4, 6, 2, 11);
        let p = init_params(&cfg).unwrap();
        let s = LstmState::zeros(&cfg);
        let a = forward(&p, &s, &[1, 2, 3, 4]).unwrap();
        let b = forward(&p, &s, &[1, 2, 3, 4]).unwrap();
        assert_eq!(a.tape.probs, b.tape.probs);
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn carry_is_consistent_across_split_calls() {
        let cfg = tiny_config(7, 4, 5, 2, 21);
        let p = init_params(&cfg).unwrap();
        let s = LstmState::zeros(&cfg);
        let all = [1u16, 3, 5, 0, 2, 6, 4, 1];
        let joint = forward(&p, &s, &all).unwrap();
        let first = forward(&p, &s, &all[..4]).unwrap();
        let second = forward(&p, &first.final_state, &all[4..]).unwrap();
        for t in 0..4 {
            for (a, b) in joint.distributions[4 + t]
                .probs()
                .iter()
                .zip(second.distributions[t].probs())
            {
                assert_relative_eq!(*a, *b, epsilon = 1e-12);
            }
        }
        for l in 0..cfg.num_layers {
            for j in 0..cfg.hidden_dim {
                assert_relative_eq!(
                    joint.final_state.h[l][j],
                    second.final_state.h[l][j],
                    epsilon = 1e-12
                );
            }
        }
    }

    /// Large gate biases force i = 1, f = 0, o = 1 exactly in f64,
    /// collapsing the cell to c_t = g_t and h_t = tanh(g_t).
    fn forced_gate_params(cfg: &ModelConfig) -> LstmParams {
        let mut p = init_params(cfg).unwrap();
        for layer in 0..cfg.num_layers {
            for (gate, bias) in [(Gate::Input, 500.0), (Gate::Output, 500.0), (Gate::Forget, -500.0)] {
                p.w_mut(layer, gate).iter_mut().for_each(|x| *x = 0.0);
                p.u_mut(layer, gate).iter_mut().for_each(|x| *x = 0.0);
                p.b_mut(layer, gate).iter_mut().for_each(|x| *x = bias);
            }
        }
        p
    }

    #[test]
    fn forced_gates_reduce_cell_to_squashed_feedforward() {
        let cfg = tiny_config(6, 4, 5, 1, 77);
        let p = forced_gate_params(&cfg);
        let mut state = LstmState::zeros(&cfg);
        state.c[0] = vec![3.0; 5];
        let x: Vec<f64> = (0..4).map(|k| 0.1 * k as f64 - 0.2).collect();
        let mut st = state.clone();
        lstm_step(&p, &mut st, &x).unwrap();
        for j in 0..5 {
            let mut a_g = p.b(0, Gate::Cell)[j];
            for k in 0..4 {
                a_g += p.w(0, Gate::Cell)[j * 4 + k] * x[k];
            }
            let g = a_g.tanh();
            assert_relative_eq!(st.c[0][j], g, epsilon = 1e-15, max_relative = 1e-12);
            assert_relative_eq!(st.h[0][j], g.tanh(), epsilon = 1e-15, max_relative = 1e-12);
        }
    }

    #[test]
    fn forced_gates_recover_vanilla_rnn() {
        // With i = 1, f = 0, o -> 1 the cell degenerates to c_t = tanh(W x_t +
        // U h_{t-1} + b) and h_t = tanh(c_t): the plain tanh RNN recursion up
        // to the output squash. Checked at loose tolerance against a scalar
        // recursion of that map; not a supported configuration.
        let cfg = tiny_config(6, 4, 5, 1, 5);
        let p = forced_gate_params(&cfg);
        let mut state = LstmState::zeros(&cfg);
        let tokens = [0u16, 3, 1, 5, 2];
        let mut h_ref = vec![0.0f64; 5];
        for &tok in &tokens {
            let x = p.embedding_row(tok).to_vec();
            lstm_step(&p, &mut state, &x).unwrap();
            let mut g_ref = [0.0; 5];
            for j in 0..5 {
                let mut a = p.b(0, Gate::Cell)[j];
                for k in 0..4 {
                    a += p.w(0, Gate::Cell)[j * 4 + k] * x[k];
                }
                for k in 0..5 {
                    a += p.u(0, Gate::Cell)[j * 5 + k] * h_ref[k];
                }
                g_ref[j] = a.tanh();
            }
            for j in 0..5 {
                assert_relative_eq!(state.c[0][j], g_ref[j], epsilon = 1e-9);
                assert_relative_eq!(state.h[0][j], g_ref[j].tanh(), epsilon = 1e-9);
            }
            h_ref = state.h[0].clone();
        }
    }

    /// A model with weights large enough that every gradient path carries
    /// real signal; keeps the finite-difference comparison sharp.
    fn random_params(cfg: &ModelConfig, seed: u64) -> LstmParams {
        let mut p = LstmParams::zeros(cfg.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in p.data_mut() {
            *x = rng.gen_range(-0.5..0.5);
        }
        p
    }

    fn random_state(cfg: &ModelConfig, seed: u64) -> LstmState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = LstmState::zeros(cfg);
        for l in 0..cfg.num_layers {
            for j in 0..cfg.hidden_dim {
                state.h[l][j] = rng.gen_range(-0.4..0.4);
                state.c[l][j] = rng.gen_range(-0.4..0.4);
            }
        }
        state
    }

    fn fd_loss(params: &LstmParams, state: &LstmState, tokens: &[TokenId], targets: &[TokenId]) -> f64 {
        forward(params, state, tokens)
            .unwrap()
            .mean_cross_entropy_nats(targets)
            .unwrap()
    }

    #[test]
    fn backward_matches_finite_differences_small() {
        let cfg = tiny_config(6, 4, 4, 2, 12345);
        let mut p = random_params(&cfg, 12345);
        let state = random_state(&cfg, 9);
        let tokens = [0u16, 3, 5, 1];
        let targets = [3u16, 5, 1, 2];
        let worst = finite_difference_check(&mut p, &state, &tokens, &targets, 1e-5).unwrap();
        assert!(worst < 1e-5, "max relative error {worst}");
    }

    #[test]
    fn backward_carry_gradients_match_finite_differences() {
        let cfg = tiny_config(5, 3, 4, 2, 5150);
        let p = random_params(&cfg, 5150);
        let state = random_state(&cfg, 3);
        let tokens = [0u16, 2, 4];
        let targets = [2u16, 4, 1];
        let fwd = forward(&p, &state, &tokens).unwrap();
        let grads = backward(&p, &fwd.tape, &targets).unwrap();
        let h = 1e-5;
        for l in 0..cfg.num_layers {
            for j in 0..cfg.hidden_dim {
                for (field, grad) in [(0, &grads.carry_h), (1, &grads.carry_c)] {
                    let mut s_up = state.clone();
                    let mut s_dn = state.clone();
                    if field == 0 {
                        s_up.h[l][j] += h;
                        s_dn.h[l][j] -= h;
                    } else {
                        s_up.c[l][j] += h;
                        s_dn.c[l][j] -= h;
                    }
                    let fd = (fd_loss(&p, &s_up, &tokens, &targets)
                        - fd_loss(&p, &s_dn, &tokens, &targets))
                        / (2.0 * h);
                    let g = grad[l][j];
                    let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-5);
                    assert!(rel < 1e-5, "carry gradient mismatch layer {l} entry {j}");
                }
            }
        }
    }

    #[test]
    fn loss_at_uniform_is_ln_vocab_and_bias_gradient_signs() {
        let cfg = tiny_config(8, 3, 4, 1, 0);
        let p = LstmParams::zeros(cfg.clone()).unwrap();
        let state = LstmState::zeros(&cfg);
        let fwd = forward(&p, &state, &[2]).unwrap();
        let loss = fwd.mean_cross_entropy_nats(&[6]).unwrap();
        assert_relative_eq!(loss, (8.0f64).ln(), epsilon = 1e-12);
        let grads = backward(&p, &fwd.tape, &[6]).unwrap();
        for (r, &g) in grads.out_bias().iter().enumerate() {
            if r == 6 {
                assert!(g < 0.0);
                assert_relative_eq!(g, 0.125 - 1.0, epsilon = 1e-12);
            } else {
                assert!(g > 0.0);
            }
        }
    }

    #[test]
    fn target_row_projection_gradient_opposes_hidden_sign() {
        let cfg = tiny_config(6, 3, 4, 1, 31);
        let p = init_params(&cfg).unwrap();
        let state = LstmState::zeros(&cfg);
        let fwd = forward(&p, &state, &[1]).unwrap();
        let target = 4u16;
        let grads = backward(&p, &fwd.tape, &[target]).unwrap();
        let h = cfg.hidden_dim;
        let h_top = &fwd.final_state.h[0];
        let row = &grads.out_proj()[target as usize * h..(target as usize + 1) * h];
        for j in 0..h {
            assert!(row[j] * h_top[j] <= 0.0, "target-row gradient must oppose h");
        }
    }

    #[test]
    fn unused_embedding_rows_have_zero_gradient() {
        let cfg = tiny_config(9, 4, 5, 2, 64);
        let p = init_params(&cfg).unwrap();
        let fwd = forward(&p, &LstmState::zeros(&cfg), &[1, 3, 1]).unwrap();
        let grads = backward(&p, &fwd.tape, &[3, 1, 5]).unwrap();
        let e = cfg.embed_dim;
        for tok in 0..9usize {
            let row = &grads.embedding()[tok * e..(tok + 1) * e];
            let used = tok == 1 || tok == 3;
            if !used {
                assert!(row.iter().all(|&x| x == 0.0), "row {tok} should be untouched");
            } else {
                assert!(row.iter().any(|&x| x != 0.0));
            }
        }
    }

    #[test]
    fn backward_rejects_length_mismatch() {
        let cfg = tiny_config(5, 3, 4, 1, 0);
        let p = init_params(&cfg).unwrap();
        let fwd = forward(&p, &LstmState::zeros(&cfg), &[0, 1]).unwrap();
        assert!(matches!(
            backward(&p, &fwd.tape, &[1]),
            Err(Error::LengthMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn scan_matches_forward_distributions() {
        let cfg = tiny_config(7, 4, 5, 2, 8);
        let p = init_params(&cfg).unwrap();
        let tokens = [0u16, 6, 2, 4, 1];
        let fwd = forward(&p, &LstmState::zeros(&cfg), &tokens).unwrap();
        let mut seen = 0;
        p.scan(&tokens, &mut |t, dist| {
            for (a, b) in dist.probs().iter().zip(fwd.distributions[t].probs()) {
                assert_relative_eq!(*a, *b, epsilon = 1e-12);
            }
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, tokens.len());
    }

}
