use std::fmt;

use serde::{Deserialize, Serialize};

use super::rope::RopeTable;
use super::{silu, LayerWeights, ModelWeights};
use crate::error::{Error, Result};
use crate::numerics::{l2_norm, rms, softmax_in_place, Matrix, Real};

/// How much of the forward pass to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaptureLevel {
    Logits,
    /// Hidden states plus attention and MLP outputs per layer.
    Hidden,
    /// Adds attention probabilities and MLP intermediates.
    Full,
}

impl std::str::FromStr for CaptureLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logits" => Ok(Self::Logits),
            "hidden" => Ok(Self::Hidden),
            "full" => Ok(Self::Full),
            _ => Err(Error::Input(format!("unknown capture level {s:?}"))),
        }
    }
}

/// Half-layer index into `ForwardTrace::hidden`. Step `2l` is the input of
/// block `l`, step `2l + 1` is the residual right after its attention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LayerStep(pub usize);

impl LayerStep {
    pub fn block_input(layer: usize) -> Self {
        Self(2 * layer)
    }

    pub fn post_attention(layer: usize) -> Self {
        Self(2 * layer + 1)
    }

    /// The layer index as a real number: 0, 0.5, 1, 1.5, ...
    pub fn as_layer(self) -> f64 {
        self.0 as f64 / 2.0
    }
}

impl fmt::Display for LayerStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(2) {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}.5", self.0 / 2)
        }
    }
}

/// Captured activations of one sequence. Matrices are position-major.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    pub capture: CaptureLevel,
    pub tokens: Vec<u32>,
    /// `hidden[step]` is `L × d_model`, `2·n_layers + 1` steps.
    pub hidden: Vec<Matrix<T>>,
    /// Attention module output before the residual add, per layer.
    pub attn_out: Vec<Matrix<T>>,
    pub mlp_out: Vec<Matrix<T>>,
    /// `attn[layer][head]` is `L × L`, query rows.
    pub attn: Vec<Vec<Matrix<T>>>,
    /// SiLU(gate) ⊙ up, `L × d_ff` per layer.
    pub mlp_intermediate: Vec<Matrix<T>>,
    pub logits: Matrix<T>,
}

impl<T: Real> ForwardTrace<T> {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn n_layers(&self) -> usize {
        self.hidden.len().saturating_sub(1) / 2
    }

    pub fn hidden_at(&self, step: LayerStep) -> Result<&Matrix<T>> {
        if self.capture == CaptureLevel::Logits {
            return Err(Error::InsufficientCapture {
                needed: "hidden",
                have: "logits",
            });
        }
        self.hidden
            .get(step.0)
            .ok_or_else(|| Error::Index(format!("step {step} of {}", self.hidden.len())))
    }

    pub fn attention(&self, layer: usize, head: usize) -> Result<&Matrix<T>> {
        if self.capture != CaptureLevel::Full {
            return Err(Error::InsufficientCapture {
                needed: "full",
                have: capture_name(self.capture),
            });
        }
        self.attn
            .get(layer)
            .and_then(|hs| hs.get(head))
            .ok_or_else(|| Error::Index(format!("layer {layer} head {head}")))
    }
}

impl ForwardTrace<f64> {
    /// Attention-only trace for synthetic metric inputs; `attn[layer][head]`
    /// must be `L × L`. Hidden fields stay empty and logits are zero.
    pub fn from_attention(attn: Vec<Vec<Matrix<f64>>>) -> Result<Self> {
        let len = attn
            .first()
            .and_then(|hs| hs.first())
            .map(|m| m.rows())
            .ok_or_else(|| Error::Input("no attention matrices".into()))?;
        if attn.iter().flatten().any(|m| m.rows() != len || m.cols() != len) {
            return Err(Error::Dimension("attention matrices must all be L x L".into()));
        }
        Ok(Self {
            capture: CaptureLevel::Full,
            tokens: vec![0; len],
            hidden: Vec::new(),
            attn_out: Vec::new(),
            mlp_out: Vec::new(),
            attn,
            mlp_intermediate: Vec::new(),
            logits: Matrix::zeros(len, 0),
        })
    }
}

pub(crate) fn capture_name(c: CaptureLevel) -> &'static str {
    match c {
        CaptureLevel::Logits => "logits",
        CaptureLevel::Hidden => "hidden",
        CaptureLevel::Full => "full",
    }
}

/// Everything one block computes, kept for the backward pass.
pub(crate) struct LayerCache<T> {
    pub h_in: Matrix<T>,
    pub x_attn: Matrix<T>,
    /// Rotated queries and keys, `L × d_model`.
    pub q: Matrix<T>,
    pub k: Matrix<T>,
    pub v: Matrix<T>,
    pub probs: Vec<Matrix<T>>,
    /// Concatenated head outputs before `Wo`.
    pub ctx: Matrix<T>,
    pub attn_out: Matrix<T>,
    pub h_mid: Matrix<T>,
    pub x_mlp: Matrix<T>,
    pub gate: Matrix<T>,
    pub up: Matrix<T>,
    pub act: Matrix<T>,
    pub mlp_out: Matrix<T>,
}

pub(crate) struct ForwardCache<T> {
    pub layers: Vec<LayerCache<T>>,
    pub h_final: Matrix<T>,
    pub x_final: Matrix<T>,
    pub logits: Matrix<T>,
}

fn norm_rows<T: Real>(h: &Matrix<T>, scale: &[T], eps: T) -> Matrix<T> {
    let mut out = Matrix::zeros(h.rows(), h.cols());
    for i in 0..h.rows() {
        let x = h.row(i);
        let inv = T::one() / rms(x, eps);
        for ((o, &xi), &s) in out.row_mut(i).iter_mut().zip(x).zip(scale) {
            *o = s * xi * inv;
        }
    }
    out
}

pub(crate) fn check_tokens<T: Real>(w: &ModelWeights<T>, tokens: &[u32]) -> Result<()> {
    let c = &w.config;
    if tokens.is_empty() {
        return Err(Error::Input("empty token sequence".into()));
    }
    if tokens.len() > c.max_seq_len {
        return Err(Error::Input(format!(
            "sequence length {} exceeds max_seq_len {}",
            tokens.len(),
            c.max_seq_len
        )));
    }
    if let Some(&t) = tokens.iter().find(|&&t| t as usize >= c.vocab_size) {
        return Err(Error::Input(format!(
            "token id {t} out of range for vocab {}",
            c.vocab_size
        )));
    }
    Ok(())
}

fn layer_forward<T: Real>(
    lw: &LayerWeights<T>,
    h_in: Matrix<T>,
    n_heads: usize,
    rope: &RopeTable<T>,
    eps: T,
) -> LayerCache<T> {
    let len = h_in.rows();
    let d = h_in.cols();
    let hd = d / n_heads;
    let x_attn = norm_rows(&h_in, &lw.attn_norm, eps);
    let mut q = x_attn.matmul(&lw.wq).expect("wq shape");
    let mut k = x_attn.matmul(&lw.wk).expect("wk shape");
    let v = x_attn.matmul(&lw.wv).expect("wv shape");
    for i in 0..len {
        for h in 0..n_heads {
            rope.apply(&mut q.row_mut(i)[h * hd..(h + 1) * hd], i, false);
            rope.apply(&mut k.row_mut(i)[h * hd..(h + 1) * hd], i, false);
        }
    }
    let scale = T::one() / T::of(hd as f64).sqrt();
    let mut ctx = Matrix::zeros(len, d);
    let mut probs = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let r = h * hd..(h + 1) * hd;
        let mut p = Matrix::zeros(len, len);
        for i in 0..len {
            let qi = &q.row(i)[r.clone()];
            let row = &mut p.row_mut(i)[..=i];
            for (j, s) in row.iter_mut().enumerate() {
                *s = crate::numerics::dot(qi, &k.row(j)[r.clone()]) * scale;
            }
            softmax_in_place(row);
            let out = &mut ctx.row_mut(i)[r.clone()];
            for (j, &pij) in p.row(i)[..=i].iter().enumerate() {
                for (o, &vj) in out.iter_mut().zip(&v.row(j)[r.clone()]) {
                    *o += pij * vj;
                }
            }
        }
        probs.push(p);
    }
    let attn_out = ctx.matmul(&lw.wo).expect("wo shape");
    let mut h_mid = h_in.clone();
    for (a, &b) in h_mid.as_mut_slice().iter_mut().zip(attn_out.as_slice()) {
        *a += b;
    }
    let x_mlp = norm_rows(&h_mid, &lw.mlp_norm, eps);
    let gate = x_mlp.matmul(&lw.w_gate).expect("w_gate shape");
    let up = x_mlp.matmul(&lw.w_up).expect("w_up shape");
    let mut act = gate.clone();
    for (a, &u) in act.as_mut_slice().iter_mut().zip(up.as_slice()) {
        *a = silu(*a) * u;
    }
    let mlp_out = act.matmul(&lw.w_down).expect("w_down shape");
    LayerCache {
        h_in,
        x_attn,
        q,
        k,
        v,
        probs,
        ctx,
        attn_out,
        h_mid,
        x_mlp,
        gate,
        up,
        act,
        mlp_out,
    }
}

pub(crate) fn forward_cached<T: Real>(w: &ModelWeights<T>, tokens: &[u32]) -> Result<ForwardCache<T>> {
    check_tokens(w, tokens)?;
    let c = &w.config;
    let eps = T::of(c.rms_eps);
    let rope = RopeTable::new(tokens.len(), c.head_dim(), c.rope_theta);
    let mut h = Matrix::from_fn(tokens.len(), c.d_model, |i, j| {
        w.embedding.get(tokens[i] as usize, j)
    });
    let mut layers = Vec::with_capacity(c.n_layers);
    for lw in &w.layers {
        let cache = layer_forward(lw, h, c.n_heads, &rope, eps);
        h = cache.h_mid.clone();
        for (a, &b) in h.as_mut_slice().iter_mut().zip(cache.mlp_out.as_slice()) {
            *a += b;
        }
        layers.push(cache);
    }
    let x_final = norm_rows(&h, &w.final_norm, eps);
    let logits = x_final.matmul(&w.lm_head)?;
    Ok(ForwardCache {
        layers,
        h_final: h,
        x_final,
        logits,
    })
}

/// Runs one sequence and keeps activations up to `capture`.
pub fn forward<T: Real>(
    weights: &ModelWeights<T>,
    tokens: &[u32],
    capture: CaptureLevel,
) -> Result<ForwardTrace<T>> {
    let cache = forward_cached(weights, tokens)?;
    let mut trace = ForwardTrace {
        capture,
        tokens: tokens.to_vec(),
        hidden: Vec::new(),
        attn_out: Vec::new(),
        mlp_out: Vec::new(),
        attn: Vec::new(),
        mlp_intermediate: Vec::new(),
        logits: cache.logits,
    };
    if capture == CaptureLevel::Logits {
        return Ok(trace);
    }
    let n = cache.layers.len();
    trace.hidden.reserve(2 * n + 1);
    for lc in cache.layers {
        trace.hidden.push(lc.h_in);
        trace.hidden.push(lc.h_mid);
        trace.attn_out.push(lc.attn_out);
        trace.mlp_out.push(lc.mlp_out);
        if capture == CaptureLevel::Full {
            trace.attn.push(lc.probs);
            trace.mlp_intermediate.push(lc.act);
        }
    }
    trace.hidden.push(cache.h_final);
    Ok(trace)
}

/// Runs each sequence independently. Sequences may differ in length.
pub fn forward_batch<T: Real, S: AsRef<[u32]>>(
    weights: &ModelWeights<T>,
    batch: &[S],
    capture: CaptureLevel,
) -> Result<Vec<ForwardTrace<T>>> {
    batch
        .iter()
        .map(|s| forward(weights, s.as_ref(), capture))
        .collect()
}

/// ℓ2 norm of the attention module output (before the residual add) at
/// every position of `layer`.
pub fn attention_output_norms<T: Real>(trace: &ForwardTrace<T>, layer: usize) -> Result<Vec<f64>> {
    if trace.capture == CaptureLevel::Logits {
        return Err(Error::InsufficientCapture {
            needed: "hidden",
            have: "logits",
        });
    }
    let a = trace
        .attn_out
        .get(layer)
        .ok_or_else(|| Error::Index(format!("layer {layer} of {}", trace.attn_out.len())))?;
    Ok((0..a.rows()).map(|i| l2_norm(a.row(i)).as_f64()).collect())
}
