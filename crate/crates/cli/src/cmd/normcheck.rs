use std::fmt::Write as _;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sinklab::numerics::{norm_stability_sweep, rms_jacobian_check, JacobianCheck, StabilityRow};

use crate::config::resolve;
use crate::output::Run;
use crate::{Common, Outcome};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NormConfig {
    dims: Vec<usize>,
    cases: usize,
    h: f64,
    tolerance: f64,
    parallel_tolerance: f64,
    gains: Vec<f64>,
    rel_perturb: f64,
    sweep_trials: usize,
    sweep_dim: usize,
    seed: u64,
}

impl Default for NormConfig {
    fn default() -> Self {
        Self {
            dims: vec![4, 32, 256],
            cases: 100,
            h: 1e-4,
            tolerance: 1e-5,
            parallel_tolerance: 1e-10,
            gains: vec![1.0, 10.0, 100.0],
            rel_perturb: 0.1,
            sweep_trials: 100,
            sweep_dim: 64,
            seed: 0,
        }
    }
}

#[derive(Serialize)]
struct NormReport {
    jacobian: Vec<JacobianCheck>,
    sweep: Vec<StabilityRow>,
    sweep_monotone: bool,
    passed: bool,
}

pub fn run(common: &Common, dims: Option<Vec<usize>>) -> Result<Outcome> {
    let flags = json!({ "dims": dims, "seed": common.seed });
    let cfg: NormConfig = resolve(common.config.as_deref(), flags)?;
    let mut run = Run::new("normcheck", &common.out_dir, cfg.seed, &cfg)?;
    let jacobian = cfg
        .dims
        .iter()
        .enumerate()
        .map(|(i, &d)| rms_jacobian_check(d, cfg.cases, cfg.h, cfg.seed.wrapping_add(i as u64)))
        .collect::<sinklab::Result<Vec<_>>>()?;
    let sweep = norm_stability_sweep(
        cfg.sweep_dim,
        &cfg.gains,
        cfg.rel_perturb,
        cfg.sweep_trials,
        cfg.seed,
    )?;
    let sweep_monotone = sweep.windows(2).all(|w| w[1].mean_delta < w[0].mean_delta);
    let jac_ok = jacobian
        .iter()
        .all(|j| j.max_abs_error <= cfg.tolerance && j.parallel_change <= cfg.parallel_tolerance);
    let report = NormReport {
        passed: jac_ok && sweep_monotone,
        jacobian,
        sweep,
        sweep_monotone,
    };
    let mut csv = String::from("gain,mean_delta,ratio_to_first\n");
    for r in &report.sweep {
        let _ = writeln!(csv, "{},{},{}", r.gain, r.mean_delta, r.ratio_to_first);
    }
    run.write("stability.csv", csv.as_bytes())?;
    run.write_json("normcheck.json", &report)?;
    run.finish()?;
    Ok(if report.passed {
        Outcome::Pass
    } else {
        Outcome::Fail("RMSNorm Jacobian or stability sweep out of tolerance".into())
    })
}
