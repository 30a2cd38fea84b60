//! wasm-bindgen bindings for the static demo page in `www/`.
//!
//! Every export returns a JSON string; errors come back as a JS exception.

use std::cell::RefCell;

use serde_json::json;
use sinklab::circuit::{build_default_circuit, negative_control, random_batch, InstalledCircuit};
use sinklab::conemodel::{mixing_curve, MixingSpec, WeightKind};
use sinklab::metrics::{classify_stage, emergence_layer, sink_center, SinkConfig};
use sinklab::model::{forward, CaptureLevel, ModelConfig, ModelWeights};
use sinklab::numerics::{l2_norm, norm_stability_sweep};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Analytic and Monte Carlo `E‖c‖²` against context length.
/// `sparse_k = 0` means uniform weights.
#[wasm_bindgen]
pub fn mixing(
    alpha: f64,
    max_len: usize,
    trials: usize,
    sparse_k: usize,
    seed: u64,
) -> Result<String, JsError> {
    let mut lengths = vec![1];
    while *lengths.last().unwrap() * 2 <= max_len.max(1) {
        lengths.push(lengths.last().unwrap() * 2);
    }
    let spec = MixingSpec {
        alpha,
        lengths,
        weights: if sparse_k == 0 {
            WeightKind::Uniform
        } else {
            WeightKind::SparseRandom { k: sparse_k }
        },
        trials,
        dim: 64,
        seed,
    };
    let rows = mixing_curve(&spec).map_err(js_err)?;
    serde_json::to_string(&rows).map_err(js_err)
}

/// How far the normalized output moves under a fixed perturbation as the
/// input is scaled up.
#[wasm_bindgen]
pub fn stability(
    dim: usize,
    max_gain: f64,
    rel_perturb: f64,
    trials: usize,
    seed: u64,
) -> Result<String, JsError> {
    let mut gains = vec![1.0];
    while gains.last().unwrap() * 2.0 <= max_gain {
        gains.push(gains.last().unwrap() * 2.0);
    }
    let rows = norm_stability_sweep(dim, &gains, rel_perturb, trials, seed).map_err(js_err)?;
    serde_json::to_string(&rows).map_err(js_err)
}

thread_local! {
    static CIRCUIT: RefCell<Option<(ModelWeights<f32>, InstalledCircuit)>> = const { RefCell::new(None) };
}

/// Runs one random sequence through the built circuit (or its control with
/// the position-zero MLP removed). Returns the designated sink head's
/// attention, per-position final norms and the stage of the sequence.
#[wasm_bindgen]
pub fn circuit_trace(len: usize, seed: u64, control: bool) -> Result<String, JsError> {
    CIRCUIT.with(|cell| {
        let mut slot = cell.borrow_mut();
        if slot.is_none() {
            *slot = Some(build_default_circuit(&ModelConfig::default()).map_err(js_err)?);
        }
        let (built, circuit) = slot.as_ref().unwrap();
        let weights = if control {
            negative_control(built, circuit)
        } else {
            built.clone()
        };
        let c = &weights.config;
        let len = len.clamp(2, c.max_seq_len);
        let tokens = random_batch(c.vocab_size, 1, len, seed).remove(0);
        let trace = forward(&weights, &tokens, CaptureLevel::Full).map_err(js_err)?;
        let head = &trace.attn[circuit.sink_layer][circuit.designated_head];
        let attn: Vec<Vec<f32>> = (0..len).map(|i| head.row(i).to_vec()).collect();
        let input = &trace.hidden[2 * circuit.sink_layer];
        let norms: Vec<f32> = (0..len).map(|i| l2_norm(input.row(i))).collect();
        let cfg = SinkConfig::default();
        let traces = std::slice::from_ref(&trace);
        let e = emergence_layer(traces, cfg.epsilon_emerge).map_err(js_err)?;
        let s = sink_center(traces, cfg.layer_min, cfg.k_max, cfg.epsilon_emerge).map_err(js_err)?;
        Ok(json!({
            "tokens": tokens,
            "sink_layer": circuit.sink_layer,
            "head": circuit.designated_head,
            "attn": attn,
            "norms": norms,
            "emergence_layer": e,
            "sink_center": s,
            "stage": classify_stage(e, s),
        })
        .to_string())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixing_rows_follow_lengths() {
        let rows: serde_json::Value = serde_json::from_str(&mixing(0.5, 8, 2000, 0, 1).unwrap()).unwrap();
        let ls: Vec<u64> = rows
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["l"].as_u64().unwrap())
            .collect();
        assert_eq!(ls, vec![1, 2, 4, 8]);
    }

    #[test]
    fn stability_ratio_falls() {
        let rows: serde_json::Value =
            serde_json::from_str(&stability(32, 16.0, 0.1, 50, 3).unwrap()).unwrap();
        let r: Vec<f64> = rows
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["ratio_to_first"].as_f64().unwrap())
            .collect();
        assert_eq!(r.len(), 5);
        assert!(r.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn circuit_trace_sinks_to_zero() {
        let v: serde_json::Value = serde_json::from_str(&circuit_trace(16, 5, false).unwrap()).unwrap();
        let attn = v["attn"].as_array().unwrap();
        assert_eq!(attn.len(), 16);
        let last = attn[15].as_array().unwrap();
        assert!(last[0].as_f64().unwrap() > 0.5);
    }
}
