//! Cone model of value vectors and the expected norm of their mixture.
//!
//! Every value vector is `v = α·u + sqrt(1−α²)·s` with a fixed unit axis `u`
//! and `s` uniform on the sphere orthogonal to `u`. Mixing `l` of them with
//! weights `p` gives `E‖Σ pᵢvᵢ‖² = α² + (1−α²)·Σ pᵢ²`, which is largest when a
//! single position carries all the mass, as position zero always does.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{l2_norm, random_unit, sample_unit_orthogonal, unit_orthogonal_into, RngState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeParams {
    alpha: f64,
    axis: Vec<f64>,
}

impl ConeParams {
    pub fn new(alpha: f64, axis: Vec<f64>) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Input(format!("alpha {alpha} outside [0, 1]")));
        }
        if axis.len() < 2 {
            return Err(Error::Dimension("cone needs dim >= 2".into()));
        }
        if (l2_norm(&axis) - 1.0).abs() > 1e-10 {
            return Err(Error::Input("cone axis must be a unit vector".into()));
        }
        Ok(Self { alpha, axis })
    }

    /// Cone around a uniformly random axis.
    pub fn random_axis(alpha: f64, dim: usize, rng: &mut RngState) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Dimension("cone needs dim >= 2".into()));
        }
        Self::new(alpha, random_unit(dim, rng))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn dim(&self) -> usize {
        self.axis.len()
    }
}

/// Unit vector at angle `acos(α)` from the axis, uniform in azimuth.
pub fn sample_cone_vector(params: &ConeParams, rng: &mut RngState) -> Vec<f64> {
    let a = params.alpha;
    if a == 1.0 {
        return params.axis.clone();
    }
    let s = sample_unit_orthogonal(&params.axis, rng).expect("validated cone params");
    let b = (1.0 - a * a).sqrt();
    params.axis.iter().zip(&s).map(|(u, si)| a * u + b * si).collect()
}

/// How attention weights over `l` positions are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttentionWeightModel {
    Uniform {
        len: usize,
    },
    Explicit {
        weights: Vec<f64>,
    },
    /// `k` random positions draw heavy mass, the rest a small background,
    /// then the vector is renormalized. Illustrative only.
    SparseRandom {
        len: usize,
        k: usize,
    },
}

const SPARSE_BACKGROUND: f64 = 0.02;

impl AttentionWeightModel {
    pub fn len(&self) -> usize {
        match self {
            Self::Uniform { len } | Self::SparseRandom { len, .. } => *len,
            Self::Explicit { weights } => weights.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Input("attention over zero positions".into()));
        }
        match self {
            Self::Explicit { weights } => check_distribution(weights),
            Self::SparseRandom { k, .. } if *k == 0 => Err(Error::Input("sparse weights need k >= 1".into())),
            _ => Ok(()),
        }
    }

    /// True when every realization puts all mass on one position.
    fn is_point_mass(&self) -> bool {
        match self {
            Self::Uniform { len } => *len == 1,
            Self::SparseRandom { len, .. } => *len == 1,
            Self::Explicit { weights } => weights.iter().filter(|&&p| p != 0.0).count() == 1,
        }
    }

    /// One weight vector; deterministic kinds ignore `rng`.
    pub fn realize(&self, rng: &mut RngState) -> Vec<f64> {
        match self {
            Self::Uniform { len } => vec![1.0 / *len as f64; *len],
            Self::Explicit { weights } => weights.clone(),
            Self::SparseRandom { len, k } => {
                let mut w: Vec<f64> = (0..*len).map(|_| SPARSE_BACKGROUND * exp1(rng)).collect();
                let mut idx: Vec<usize> = (0..*len).collect();
                for i in 0..(*k).min(*len) {
                    let j = i + rng.below(*len - i);
                    idx.swap(i, j);
                    w[idx[i]] += exp1(rng);
                }
                let total: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= total);
                w
            }
        }
    }
}

fn exp1(rng: &mut RngState) -> f64 {
    -(1.0 - rng.uniform()).ln()
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Input(
            "attention weights must be finite and nonnegative".into(),
        ));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::Input(format!("attention weights sum to {s}")));
    }
    Ok(())
}

/// `α² + (1−α²)·Σ pᵢ²`
pub fn conditional_expected_sq_norm(alpha: f64, p: &[f64]) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Input(format!("alpha {alpha} outside [0, 1]")));
    }
    if p.is_empty() {
        return Err(Error::Input("empty weight vector".into()));
    }
    check_distribution(p)?;
    let sq: f64 = p.iter().map(|x| x * x).sum();
    Ok(alpha * alpha + (1.0 - alpha * alpha) * sq)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: usize,
    /// Sample mean of `Σ pᵢ²` over the realized weights.
    pub mean_sum_sq_weights: f64,
}

/// Monte Carlo estimate of `E‖Σ pᵢvᵢ‖²` with fresh value vectors (and fresh
/// weights for random kinds) every trial.
pub fn monte_carlo_sq_norm(
    params: &ConeParams,
    weights: &AttentionWeightModel,
    trials: usize,
    rng: &mut RngState,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::Input("trials must be >= 1".into()));
    }
    weights.validate()?;
    // Both degenerate cases are exactly 1 in real arithmetic; sampling would
    // only add rounding.
    if params.alpha == 1.0 || weights.is_point_mass() {
        let p = weights.realize(rng);
        let sq: f64 = p.iter().map(|x| x * x).sum();
        return Ok(McEstimate {
            mean: 1.0,
            std_error: 0.0,
            trials,
            mean_sum_sq_weights: if weights.is_point_mass() { 1.0 } else { sq },
        });
    }
    let d = params.dim();
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut psq_sum = 0.0;
    let (a, b) = (params.alpha, (1.0 - params.alpha * params.alpha).sqrt());
    let mut c = vec![0.0; d];
    let mut s = vec![0.0; d];
    for t in 0..trials {
        let p = weights.realize(rng);
        psq_sum += p.iter().map(|x| x * x).sum::<f64>();
        // Σ pᵢ(α·u + β·sᵢ) = (α·Σpᵢ)·u + β·Σ pᵢsᵢ
        c.iter_mut().for_each(|x| *x = 0.0);
        for &pi in &p {
            unit_orthogonal_into(&params.axis, rng, &mut s);
            c.iter_mut().zip(&s).for_each(|(ci, si)| *ci += pi * si);
        }
        let mass: f64 = p.iter().sum();
        let x: f64 = c
            .iter()
            .zip(&params.axis)
            .map(|(ci, ui)| {
                let v = a * mass * ui + b * ci;
                v * v
            })
            .sum();
        let delta = x - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (x - mean);
    }
    let std_error = if trials > 1 {
        (m2 / (trials - 1) as f64 / trials as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(McEstimate {
        mean,
        std_error,
        trials,
        mean_sum_sq_weights: psq_sum / trials as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    Uniform,
    SparseRandom { k: usize },
}

impl WeightKind {
    pub fn model(self, len: usize) -> AttentionWeightModel {
        match self {
            Self::Uniform => AttentionWeightModel::Uniform { len },
            Self::SparseRandom { k } => AttentionWeightModel::SparseRandom { len, k },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingRow {
    pub alpha: f64,
    pub l: usize,
    pub analytic: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingSpec {
    pub alpha: f64,
    pub lengths: Vec<usize>,
    pub weights: WeightKind,
    pub trials: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for MixingSpec {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            lengths: vec![1, 2, 8, 32],
            weights: WeightKind::Uniform,
            trials: 100_000,
            dim: 64,
            seed: 0,
        }
    }
}

/// Analytic and Monte Carlo `E‖c‖²` for each length. Uniform weights use
/// `Σp² = 1/l`; random weights use the sample mean of `Σp²` over the same
/// draws that feed the Monte Carlo column.
pub fn mixing_curve(spec: &MixingSpec) -> Result<Vec<MixingRow>> {
    if spec.lengths.is_empty() {
        return Err(Error::Input("no lengths given".into()));
    }
    let root = RngState::new(spec.seed);
    let params = ConeParams::random_axis(spec.alpha, spec.dim, &mut root.split(0))?;
    let a2 = spec.alpha * spec.alpha;
    spec.lengths
        .iter()
        .map(|&l| {
            let model = spec.weights.model(l);
            let mut rng = root.split(1 + l as u64);
            let mc = monte_carlo_sq_norm(&params, &model, spec.trials, &mut rng)?;
            let analytic = match spec.weights {
                WeightKind::Uniform => a2 + (1.0 - a2) / l as f64,
                WeightKind::SparseRandom { .. } => a2 + (1.0 - a2) * mc.mean_sum_sq_weights,
            };
            Ok(MixingRow {
                alpha: spec.alpha,
                l,
                analytic,
                mc_mean: mc.mean,
                mc_stderr: mc.std_error,
                trials: spec.trials,
                seed: spec.seed,
            })
        })
        .collect()
}

pub fn mixing_csv(rows: &[MixingRow]) -> String {
    let mut s = String::from("alpha,l,analytic,mc_mean,mc_stderr,trials,seed\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.alpha, r.l, r.analytic, r.mc_mean, r.mc_stderr, r.trials, r.seed
        );
    }
    s
}
