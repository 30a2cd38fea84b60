use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sinklab::conemodel::{mixing_csv, mixing_curve, MixingRow, MixingSpec, WeightKind};

use crate::config::resolve;
use crate::output::Run;
use crate::{Common, Outcome};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConeConfig {
    alphas: Vec<f64>,
    lengths: Vec<usize>,
    weights: WeightKind,
    trials: usize,
    dim: usize,
    seed: u64,
}

impl Default for ConeConfig {
    fn default() -> Self {
        let m = MixingSpec::default();
        Self {
            alphas: vec![m.alpha],
            lengths: m.lengths,
            weights: m.weights,
            trials: m.trials,
            dim: m.dim,
            seed: m.seed,
        }
    }
}

/// Sampling agrees with the closed form within four standard errors, or
/// exactly when the estimate has no spread.
fn agrees(r: &MixingRow) -> bool {
    let gap = (r.mc_mean - r.analytic).abs();
    if r.mc_stderr == 0.0 {
        gap <= 1e-12
    } else {
        gap <= 4.0 * r.mc_stderr
    }
}

pub fn run(
    common: &Common,
    alphas: Vec<f64>,
    lengths: Option<Vec<usize>>,
    trials: Option<usize>,
    dim: Option<usize>,
    sparse_k: Option<usize>,
) -> Result<Outcome> {
    let flags = json!({
        "alphas": (!alphas.is_empty()).then_some(alphas),
        "lengths": lengths,
        "trials": trials,
        "dim": dim,
        "weights": sparse_k.map(|k| WeightKind::SparseRandom { k }),
        "seed": common.seed,
    });
    let cfg: ConeConfig = resolve(common.config.as_deref(), flags)?;
    let mut run = Run::new("cone", &common.out_dir, cfg.seed, &cfg)?;
    let mut rows = Vec::new();
    for &alpha in &cfg.alphas {
        rows.extend(mixing_curve(&MixingSpec {
            alpha,
            lengths: cfg.lengths.clone(),
            weights: cfg.weights,
            trials: cfg.trials,
            dim: cfg.dim,
            seed: cfg.seed,
        })?);
    }
    run.write("mixing.csv", mixing_csv(&rows).as_bytes())?;
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !agrees(r))
        .map(|r| format!("alpha {} l {}", r.alpha, r.l))
        .collect();
    run.finish()?;
    eprintln!("cone: {} rows, {} outside 4 sigma", rows.len(), bad.len());
    Ok(if bad.is_empty() {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("Monte Carlo disagrees at {}", bad.join(", ")))
    })
}
