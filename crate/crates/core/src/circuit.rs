//! Analytic construction of the two-block position-zero sink circuit.
//!
//! The residual stream is split into disjoint subspaces. Token embeddings
//! live in `E` (one head wide) as cone vectors, plus a constant bias channel
//! `b`. Block 0 averages uniformly and writes a rotated copy of the mixed
//! tokens into `F`; every head carries the same share, so removing one only
//! rescales the signal. Block 1 reads the cone axis out of `F` into a single
//! channel `g`. Position 0 is the only position whose mixture is a single
//! unit vector, so its `g / b` ratio sits at an extreme that no other
//! position reaches. Block 1's MLP thresholds that ratio and writes `G·u_sink`
//! at position 0 only, and the layer-2 heads key on `u_sink`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json_digest;
use crate::model::{forward, CaptureLevel, ModelConfig, ModelWeights};
use crate::numerics::{
    dot, l2_norm, normalize, random_orthogonal, random_unit, rms, sample_unit_orthogonal, Matrix, Real,
    RngState,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub gain: f64,
    pub sink_axis: Vec<f64>,
    pub probe_rows: usize,
    pub gate_sharpness: f64,
    pub calibration_margin_min: f64,
}

impl CircuitSpec {
    /// Defaults: `G = 100`, four probe rows, `β = 50`, and a sink axis drawn
    /// from seed 0.
    pub fn new(d_model: usize) -> Self {
        Self {
            gain: 100.0,
            sink_axis: random_unit(d_model, &mut RngState::new(0)),
            probe_rows: 4,
            gate_sharpness: 50.0,
            calibration_margin_min: 0.01,
        }
    }

    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        if !(self.gain > 1.0) {
            return Err(Error::Config(format!("gain {} must exceed 1", self.gain)));
        }
        if !(self.gate_sharpness > 0.0) {
            return Err(Error::Config("gate sharpness must be positive".into()));
        }
        if self.sink_axis.len() != config.d_model {
            return Err(Error::Dimension(format!(
                "sink axis has dim {}, model {}",
                self.sink_axis.len(),
                config.d_model
            )));
        }
        if (l2_norm(&self.sink_axis) - 1.0).abs() > 1e-9 {
            return Err(Error::Config("sink axis must be a unit vector".into()));
        }
        if self.probe_rows == 0 || self.probe_rows > config.d_ff {
            return Err(Error::Config(format!(
                "probe_rows {} must be in 1..={}",
                self.probe_rows, config.d_ff
            )));
        }
        Ok(())
    }
}

/// Scales of the embedding and of blocks 0 and 1. Both blocks read
/// normalized input, so scaling all four together changes only the size of
/// the residual stream, not which side of the threshold a position lands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    /// Cosine of every token embedding to the shared axis.
    pub cone_alpha: f64,
    pub token_scale: f64,
    /// Value of the constant channel in every embedding.
    pub bias: f64,
    /// Total block-0 write into `F`, summed over heads.
    pub spread_gain: f64,
    /// Total block-1 write into `g`, summed over heads.
    pub readout_gain: f64,
}

impl Default for Layout {
    fn default() -> Self {
        Self {
            cone_alpha: 0.5,
            token_scale: 0.25,
            bias: 0.25,
            spread_gain: 1.0,
            readout_gain: 0.25,
        }
    }
}

/// Residual-stream coordinates used by the construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subspaces {
    pub tokens: Range<usize>,
    pub bias: usize,
    pub spread: Range<usize>,
    pub readout: usize,
}

impl Subspaces {
    pub fn for_config(c: &ModelConfig) -> Result<Self> {
        c.validate()?;
        let hd = c.head_dim();
        if c.d_model < 2 * hd + 2 {
            return Err(Error::Config(format!(
                "circuit needs d_model >= 2*head_dim + 2 (have {} and {hd})",
                c.d_model
            )));
        }
        if c.n_layers < 3 {
            return Err(Error::Config("circuit needs at least 3 layers".into()));
        }
        Ok(Self {
            tokens: 0..hd,
            bias: hd,
            spread: hd + 1..2 * hd + 1,
            readout: 2 * hd + 1,
        })
    }
}

/// Which coordinates a probe may use and an optional positive reference
/// channel that stands in for a bias.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeBasis {
    pub readout: Option<Vec<usize>>,
    pub reference: Option<Vec<f64>>,
}

/// Linear position-zero detector. With a reference `r` the score is
/// `(w·x)/(r·x)`, otherwise `w·x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct P0Probe {
    pub direction: Vec<f64>,
    pub reference: Option<Vec<f64>>,
    /// Midpoint between the lowest position-0 score and the highest other.
    pub threshold: f64,
    pub margin: f64,
    pub p0_score_mean: f64,
    /// Mean `r·x` over position-0 samples (mean `w·x` without a reference).
    pub p0_scale_mean: f64,
    pub n_p0: usize,
    pub n_rest: usize,
}

impl P0Probe {
    pub fn score(&self, x: &[f64]) -> f64 {
        let wx = dot(&self.direction, x);
        match &self.reference {
            None => wx,
            Some(r) => {
                let rx = dot(r, x);
                if rx > 0.0 {
                    wx / rx
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// Nearest-centroid probe between position-0 rows and all other rows.
pub fn fit_probe(p0: &[Vec<f64>], rest: &[Vec<f64>], basis: &ProbeBasis, margin_min: f64) -> Result<P0Probe> {
    let fail = |margin| Error::CalibrationFailed {
        margin,
        required: margin_min,
    };
    if p0.is_empty() || rest.is_empty() {
        return Err(fail(f64::NEG_INFINITY));
    }
    let d = p0[0].len();
    let mean = |rows: &[Vec<f64>]| {
        let mut m = vec![0.0; d];
        for r in rows {
            m.iter_mut().zip(r).for_each(|(a, b)| *a += b);
        }
        m.iter_mut().for_each(|a| *a /= rows.len() as f64);
        m
    };
    let mut diff: Vec<f64> = mean(p0).iter().zip(mean(rest)).map(|(a, b)| a - b).collect();
    if let Some(keep) = &basis.readout {
        for (i, v) in diff.iter_mut().enumerate() {
            if !keep.contains(&i) {
                *v = 0.0;
            }
        }
    }
    let direction = normalize(&diff).ok_or_else(|| fail(0.0))?;
    let mut probe = P0Probe {
        direction,
        reference: basis.reference.clone(),
        threshold: 0.0,
        margin: 0.0,
        p0_score_mean: 0.0,
        p0_scale_mean: 0.0,
        n_p0: p0.len(),
        n_rest: rest.len(),
    };
    let p0_scores: Vec<f64> = p0.iter().map(|x| probe.score(x)).collect();
    let lo = p0_scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rest
        .iter()
        .map(|x| probe.score(x))
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = lo - hi;
    if !(margin >= margin_min) {
        return Err(fail(margin));
    }
    probe.margin = margin;
    probe.threshold = 0.5 * (lo + hi);
    probe.p0_score_mean = p0_scores.iter().sum::<f64>() / p0.len() as f64;
    probe.p0_scale_mean = p0
        .iter()
        .map(|x| match &probe.reference {
            Some(r) => dot(r, x),
            None => dot(&probe.direction, x),
        })
        .sum::<f64>()
        / p0.len() as f64;
    Ok(probe)
}

/// Normalized MLP input of `layer` (the residual after attention, through
/// the MLP norm) for every position of every sequence.
pub fn mlp_inputs<T: Real>(
    weights: &ModelWeights<T>,
    batch: &[Vec<u32>],
    layer: usize,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let lw = weights.layer(layer)?;
    let scale: Vec<f64> = lw.mlp_norm.iter().map(|s| s.as_f64()).collect();
    let eps = weights.config.rms_eps;
    batch
        .iter()
        .map(|seq| {
            let t = forward(weights, seq, CaptureLevel::Hidden)?;
            let h = &t.hidden[2 * layer + 1];
            Ok((0..h.rows())
                .map(|i| {
                    let x: Vec<f64> = h.row(i).iter().map(|v| v.as_f64()).collect();
                    let inv = 1.0 / rms(&x, eps);
                    x.iter().zip(&scale).map(|(a, s)| a * inv * s).collect()
                })
                .collect())
        })
        .collect()
}

/// Fits the probe on the block-`layer` MLP inputs of `batch`.
pub fn calibrate_p0_probe<T: Real>(
    weights: &ModelWeights<T>,
    batch: &[Vec<u32>],
    layer: usize,
    basis: &ProbeBasis,
    margin_min: f64,
) -> Result<P0Probe> {
    let mut p0 = Vec::new();
    let mut rest = Vec::new();
    for rows in mlp_inputs(weights, batch, layer)? {
        let mut it = rows.into_iter();
        if let Some(first) = it.next() {
            p0.push(first);
        }
        rest.extend(it);
    }
    fit_probe(&p0, &rest, basis, margin_min)
}

/// Scores `x` against the probe rows of an installed MLP the way the layer
/// computes them: the largest gate pre-activation.
fn gate_preactivation<T: Real>(w_gate: &Matrix<T>, rows: usize, x: &[f64]) -> f64 {
    (0..rows)
        .map(|k| {
            (0..x.len())
                .map(|i| w_gate.get(i, k).as_f64() * x[i])
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Rewrites block `layer`'s MLP so its first `probe_rows` hidden units fire
/// on position 0 and emit `G·u_sink` there. Every other unit is zeroed.
pub fn install_p0_mlp<T: Real>(
    weights: &mut ModelWeights<T>,
    layer: usize,
    spec: &CircuitSpec,
    probe: &P0Probe,
) -> Result<()> {
    spec.validate(&weights.config)?;
    let beta = spec.gate_sharpness;
    let (gate_col, up_col, gate_mean, up_mean) = match &probe.reference {
        Some(r) => {
            let lambda = beta / (0.5 * probe.margin * probe.p0_scale_mean);
            let g: Vec<f64> = probe
                .direction
                .iter()
                .zip(r)
                .map(|(w, r)| lambda * (w - probe.threshold * r))
                .collect();
            let gm = lambda * probe.p0_scale_mean * (probe.p0_score_mean - probe.threshold);
            (g, r.clone(), gm, probe.p0_scale_mean)
        }
        None => {
            // Without a reference channel the only bias-free threshold is 0.
            if probe.threshold - 0.5 * probe.margin >= 0.0 {
                return Err(Error::Config(
                    "probe without a reference channel needs rest scores below zero".into(),
                ));
            }
            let lambda = beta / probe.p0_scale_mean;
            let g: Vec<f64> = probe.direction.iter().map(|w| lambda * w).collect();
            (g, probe.direction.clone(), beta, probe.p0_scale_mean)
        }
    };
    let silu = gate_mean / (1.0 + (-gate_mean).exp());
    let down = spec.gain / (spec.probe_rows as f64 * silu * up_mean);
    let lw = weights.layer_mut(layer)?;
    lw.w_gate.fill(T::zero());
    lw.w_up.fill(T::zero());
    lw.w_down.fill(T::zero());
    for k in 0..spec.probe_rows {
        for i in 0..gate_col.len() {
            lw.w_gate.set(i, k, T::of(gate_col[i]));
            lw.w_up.set(i, k, T::of(up_col[i]));
        }
        for (j, &u) in spec.sink_axis.iter().enumerate() {
            lw.w_down.set(k, j, T::of(down * u));
        }
    }
    Ok(())
}

/// Mean attention from queries `i ≥ 1` to position 0 (query 0 alone for
/// one-token sequences) over `heads` of `layer`.
pub fn attention_to_p0<T: Real>(
    weights: &ModelWeights<T>,
    batch: &[Vec<u32>],
    layer: usize,
    heads: &[usize],
) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for seq in batch {
        let t = forward(weights, seq, CaptureLevel::Full)?;
        for &h in heads {
            let p = t.attention(layer, h)?;
            if p.rows() == 1 {
                total += p.get(0, 0).as_f64();
                n += 1;
            }
            for i in 1..p.rows() {
                total += p.get(i, 0).as_f64();
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::EmptyEvaluation);
    }
    Ok(total / n as f64)
}

const SINK_TARGET: f64 = 0.95;
const SINK_REQUIRED: f64 = 0.9;

/// Makes each head in `heads` of `layer` query `query_channel` against keys
/// along `u_sink`, on the slowest rotary pair so relative position barely
/// matters. The query scale doubles until the mean attention to position 0
/// on `batch` reaches 0.95; falling short of 0.9 is an error.
pub fn install_sink_query_head<T: Real>(
    weights: &mut ModelWeights<T>,
    layer: usize,
    heads: &[usize],
    query_channel: &[f64],
    spec: &CircuitSpec,
    batch: &[Vec<u32>],
) -> Result<f64> {
    if layer < 2 {
        return Err(Error::Config(
            "the sink query head goes in layer 2 or later".into(),
        ));
    }
    let c = weights.config.clone();
    let hd = c.head_dim();
    if let Some(&h) = heads.iter().find(|&&h| h >= c.n_heads) {
        return Err(Error::Index(format!("head {h} of {}", c.n_heads)));
    }
    let set_scale = |w: &mut ModelWeights<T>, scale: f64| -> Result<()> {
        let lw = w.layer_mut(layer)?;
        for &h in heads {
            for col in h * hd..(h + 1) * hd {
                for i in 0..c.d_model {
                    lw.wq.set(i, col, T::zero());
                    lw.wk.set(i, col, T::zero());
                }
            }
            let col = h * hd + hd - 2;
            for i in 0..c.d_model {
                lw.wq.set(i, col, T::of(scale * query_channel[i]));
                lw.wk.set(i, col, T::of(spec.sink_axis[i]));
            }
        }
        Ok(())
    };
    let mut best = (f64::NEG_INFINITY, 1.0);
    let mut scale = 1.0;
    for _ in 0..20 {
        set_scale(weights, scale)?;
        let got = attention_to_p0(weights, batch, layer, heads)?;
        if got > best.0 {
            best = (got, scale);
        }
        if got >= SINK_TARGET {
            return Ok(scale);
        }
        scale *= 2.0;
    }
    set_scale(weights, best.1)?;
    if best.0 >= SINK_REQUIRED {
        return Ok(best.1);
    }
    Err(Error::ConstructionFailed {
        what: "sink query head",
        measured: best.0,
        required: SINK_REQUIRED,
    })
}

/// Wq = Wk = 0 (exactly uniform causal attention), random orthogonal Wv and
/// Wo, and a zero MLP write-out.
pub fn build_uniform_attention_layer<T: Real>(
    weights: &mut ModelWeights<T>,
    layer: usize,
    rng: &mut RngState,
) -> Result<()> {
    let lw = weights.layer_mut(layer)?;
    lw.wq.fill(T::zero());
    lw.wk.fill(T::zero());
    lw.wv = random_orthogonal(lw.wv.rows(), rng).cast();
    lw.wo = random_orthogonal(lw.wo.rows(), rng).cast();
    lw.w_down.fill(T::zero());
    Ok(())
}

/// Token embeddings `α·u + sqrt(1−α²)·s_t` around a random axis. Used by the
/// uniform-mixing experiments.
pub fn cone_embedding<T: Real>(vocab: usize, d: usize, alpha: f64, rng: &mut RngState) -> Result<Matrix<T>> {
    let u = random_unit(d, rng);
    let b = (1.0 - alpha * alpha).sqrt();
    let mut m = Matrix::zeros(vocab, d);
    for t in 0..vocab {
        let s = sample_unit_orthogonal(&u, rng)?;
        for j in 0..d {
            m.set(t, j, T::of(alpha * u[j] + b * s[j]));
        }
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSeeds {
    pub build: u64,
    pub calibration: u64,
}

/// Everything needed to verify or ablate a built circuit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstalledCircuit {
    pub spec: CircuitSpec,
    pub layout: Layout,
    pub probe: P0Probe,
    pub mlp_layer: usize,
    pub sink_layer: usize,
    pub sink_heads: Vec<usize>,
    pub designated_head: usize,
    pub query_scale: f64,
    pub calibration_digest: String,
    pub seeds: CircuitSeeds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitReport {
    pub p0_norm_ratio: f64,
    pub p0_direction_consistency: f64,
    pub false_positive_rate: f64,
    pub downstream_sink_score: f64,
    pub calibration_margin: f64,
    pub held_out: bool,
    pub n_sequences: usize,
    pub config_digest: String,
    pub seeds: CircuitSeeds,
}

impl CircuitReport {
    /// The default-build thresholds.
    pub fn passes(&self) -> bool {
        self.p0_norm_ratio >= 10.0
            && self.p0_direction_consistency >= 0.99
            && self.false_positive_rate <= 0.01
            && self.downstream_sink_score >= 0.9
    }
}

/// Measures the circuit on `eval` (sequences of length ≥ 2).
pub fn verify_p0_circuit<T: Real>(
    weights: &ModelWeights<T>,
    circuit: &InstalledCircuit,
    eval: &[Vec<u32>],
) -> Result<CircuitReport> {
    if eval.is_empty() || eval.iter().any(|s| s.len() < 2) {
        return Err(Error::Input("evaluation needs sequences of length >= 2".into()));
    }
    let c = &weights.config;
    let step = 2 * (circuit.mlp_layer + 1);
    let lw = weights.layer(circuit.mlp_layer)?;
    let scale: Vec<f64> = lw.mlp_norm.iter().map(|s| s.as_f64()).collect();
    let (mut p0_norm, mut rest_norm, mut cos) = (0.0, 0.0, 0.0);
    let (mut n_rest, mut fired) = (0usize, 0usize);
    let (mut sink, mut n_sink) = (0.0, 0usize);
    for seq in eval {
        let t = forward(weights, seq, CaptureLevel::Full)?;
        let h = &t.hidden[step];
        let p0: Vec<f64> = h.row(0).iter().map(|v| v.as_f64()).collect();
        p0_norm += l2_norm(&p0);
        cos += crate::numerics::cosine(&p0, &circuit.spec.sink_axis);
        let mid = &t.hidden[step - 1];
        for i in 1..h.rows() {
            rest_norm += l2_norm(h.row(i)).as_f64();
            n_rest += 1;
            let x: Vec<f64> = mid.row(i).iter().map(|v| v.as_f64()).collect();
            let inv = 1.0 / rms(&x, c.rms_eps);
            let x: Vec<f64> = x.iter().zip(&scale).map(|(a, s)| a * inv * s).collect();
            if gate_preactivation(&lw.w_gate, circuit.spec.probe_rows, &x) > 0.0 {
                fired += 1;
            }
        }
        let p = t.attention(circuit.sink_layer, circuit.designated_head)?;
        for i in 1..p.rows() {
            sink += p.get(i, 0).as_f64();
            n_sink += 1;
        }
    }
    let n = eval.len() as f64;
    Ok(CircuitReport {
        p0_norm_ratio: (p0_norm / n) / (rest_norm / n_rest as f64),
        p0_direction_consistency: cos / n,
        false_positive_rate: fired as f64 / n_rest as f64,
        downstream_sink_score: sink / n_sink as f64,
        calibration_margin: circuit.probe.margin,
        held_out: json_digest(&eval) != circuit.calibration_digest,
        n_sequences: eval.len(),
        config_digest: json_digest(c),
        seeds: circuit.seeds.clone(),
    })
}

/// Uniform random sequences of length `len`.
pub fn random_batch(vocab: usize, n: usize, len: usize, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = RngState::new(seed);
    (0..n)
        .map(|_| (0..len).map(|_| rng.below(vocab) as u32).collect())
        .collect()
}

/// Construction inputs: first tokens cycle through the vocabulary and the
/// second token always differs from the first. A sequence that opens with a
/// repeated token is indistinguishable from position 0 at position 1.
pub fn calibration_batch(vocab: usize, n: usize, len: usize, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = RngState::new(seed);
    (0..n)
        .map(|i| {
            let mut s: Vec<u32> = (0..len).map(|_| rng.below(vocab) as u32).collect();
            s[0] = (i % vocab) as u32;
            while len > 1 && s[1] == s[0] {
                s[1] = rng.below(vocab) as u32;
            }
            s
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub spec: CircuitSpec,
    pub layout: Layout,
    pub seed: u64,
    pub calibration_seed: u64,
    pub calibration_sequences: usize,
}

impl BuildOptions {
    pub fn new(config: &ModelConfig) -> Self {
        Self {
            spec: CircuitSpec::new(config.d_model),
            layout: Layout::default(),
            seed: 0,
            calibration_seed: 1,
            calibration_sequences: 128,
        }
    }
}

fn set_block0<T: Real>(
    w: &mut ModelWeights<T>,
    sub: &Subspaces,
    layout: &Layout,
    rng: &mut RngState,
) -> Result<()> {
    let c = w.config.clone();
    let hd = c.head_dim();
    let e = sub.tokens.len();
    let spread = random_orthogonal(e, rng);
    let share = layout.spread_gain / c.n_heads as f64;
    let lw = w.layer_mut(0)?;
    lw.wq.fill(T::zero());
    lw.wk.fill(T::zero());
    lw.wv.fill(T::zero());
    lw.wo.fill(T::zero());
    for h in 0..c.n_heads {
        // Wv_h·Wo_h = share·spread for every head.
        let q = random_orthogonal(hd, rng);
        for i in 0..e {
            for a in 0..hd {
                lw.wv.set(sub.tokens.start + i, h * hd + a, T::of(q.get(i, a)));
            }
        }
        for a in 0..hd {
            for j in 0..e {
                let v: f64 = (0..e).map(|i| q.get(i, a) * spread.get(i, j)).sum::<f64>();
                lw.wo.set(h * hd + a, sub.spread.start + j, T::of(share * v));
            }
        }
    }
    lw.w_gate.fill(T::zero());
    lw.w_up.fill(T::zero());
    lw.w_down.fill(T::zero());
    lw.attn_norm.iter_mut().for_each(|s| *s = T::one());
    lw.mlp_norm.iter_mut().for_each(|s| *s = T::one());
    Ok(())
}

/// Builds the full circuit into freshly initialized weights and verifies the
/// sink head on the construction batch.
pub fn build_circuit(
    config: &ModelConfig,
    opts: &BuildOptions,
) -> Result<(ModelWeights<f32>, InstalledCircuit)> {
    let sub = Subspaces::for_config(config)?;
    opts.spec.validate(config)?;
    let layout = &opts.layout;
    let c = config;
    let hd = c.head_dim();
    let root = RngState::new(opts.seed);
    let mut w = crate::train::init_weights::<f64>(c, opts.seed)?;

    // embeddings
    let mut rng = root.split(1);
    let e = sub.tokens.len();
    let u = random_unit(e, &mut rng);
    let b = (1.0 - layout.cone_alpha * layout.cone_alpha).sqrt();
    let half = c.vocab_size.div_ceil(2);
    let dirs: Vec<Vec<f64>> = (0..half)
        .map(|_| sample_unit_orthogonal(&u, &mut rng))
        .collect::<Result<_>>()?;
    w.embedding.fill(0.0);
    for t in 0..c.vocab_size {
        let (s, sign) = if t < half {
            (&dirs[t], 1.0)
        } else {
            (&dirs[t - half], -1.0)
        };
        for i in 0..e {
            let v = layout.token_scale * (layout.cone_alpha * u[i] + sign * b * s[i]);
            w.embedding.set(t, sub.tokens.start + i, v);
        }
        w.embedding.set(t, sub.bias, layout.bias);
    }

    set_block0(&mut w, &sub, layout, &mut root.split(2))?;

    // block 1 reads the cone axis out of the spread subspace
    let spread_axis: Vec<f64> = {
        let lw = &w.layers[0];
        let mut m = vec![0.0; c.d_model];
        for (i, ui) in u.iter().enumerate() {
            let x: Vec<f64> = (0..c.d_model)
                .map(|j| if j == sub.tokens.start + i { 1.0 } else { 0.0 })
                .collect();
            let mixed = lw.wo.vec_mul(&lw.wv.vec_mul(&x));
            m.iter_mut().zip(&mixed).for_each(|(a, v)| *a += ui * v);
        }
        normalize(&m).ok_or_else(|| Error::Config("degenerate block 0".into()))?
    };
    {
        let lw = w.layer_mut(1)?;
        lw.wq.fill(0.0);
        lw.wk.fill(0.0);
        lw.wv.fill(0.0);
        lw.wo.fill(0.0);
        let share = layout.readout_gain / c.n_heads as f64;
        for h in 0..c.n_heads {
            for (j, &a) in spread_axis.iter().enumerate() {
                lw.wv.set(j, h * hd, a);
            }
            lw.wo.set(h * hd, sub.readout, share);
        }
        lw.w_gate.fill(0.0);
        lw.w_up.fill(0.0);
        lw.w_down.fill(0.0);
        lw.attn_norm.iter_mut().for_each(|s| *s = 1.0);
        lw.mlp_norm.iter_mut().for_each(|s| *s = 1.0);
    }

    let calib = calibration_batch(
        c.vocab_size,
        opts.calibration_sequences,
        c.max_seq_len,
        opts.calibration_seed,
    );
    let mut bias_dir = vec![0.0; c.d_model];
    bias_dir[sub.bias] = 1.0;
    let basis = ProbeBasis {
        readout: Some(vec![sub.readout]),
        reference: Some(bias_dir.clone()),
    };
    let probe = calibrate_p0_probe(&w, &calib, 1, &basis, opts.spec.calibration_margin_min)?;
    install_p0_mlp(&mut w, 1, &opts.spec, &probe)?;

    let heads: Vec<usize> = (0..c.n_heads).collect();
    w.layers[2].attn_norm.iter_mut().for_each(|s| *s = 1.0);
    let query_scale = install_sink_query_head(&mut w, 2, &heads, &bias_dir, &opts.spec, &calib)?;

    let circuit = InstalledCircuit {
        spec: opts.spec.clone(),
        layout: layout.clone(),
        probe,
        mlp_layer: 1,
        sink_layer: 2,
        sink_heads: heads,
        designated_head: 0,
        query_scale,
        calibration_digest: json_digest(&calib),
        seeds: CircuitSeeds {
            build: opts.seed,
            calibration: opts.calibration_seed,
        },
    };
    Ok((w.cast(), circuit))
}

/// The default circuit on `config`.
pub fn build_default_circuit(config: &ModelConfig) -> Result<(ModelWeights<f32>, InstalledCircuit)> {
    build_circuit(config, &BuildOptions::new(config))
}

/// Same weights with block 1's MLP write-out removed, so position 0 is never
/// amplified (the `G = 0` control).
pub fn negative_control<T: Real>(weights: &ModelWeights<T>, circuit: &InstalledCircuit) -> ModelWeights<T> {
    let mut w = weights.clone();
    w.layers[circuit.mlp_layer].w_down.fill(T::zero());
    w
}
