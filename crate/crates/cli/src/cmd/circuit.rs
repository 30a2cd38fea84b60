use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sinklab::circuit::{
    build_circuit, random_batch, verify_p0_circuit, BuildOptions, CircuitReport, InstalledCircuit, Layout,
};
use sinklab::metrics::{ablate_head, pgm_p5};
use sinklab::model::{
    forward, load_checkpoint, save_checkpoint, CaptureLevel, Checkpoint, ModelConfig, ModelWeights,
};
use sinklab::Error;

use crate::config::resolve;
use crate::output::Run;
use crate::{Common, Outcome};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuildConfig {
    model: ModelConfig,
    layout: Layout,
    gain: f64,
    seed: u64,
    calibration_seed: u64,
    calibration_sequences: usize,
    eval: EvalConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalConfig {
    sequences: usize,
    seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            sequences: 100,
            seed: 99,
        }
    }
}

impl Default for BuildConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        let opts = BuildOptions::new(&model);
        Self {
            gain: opts.spec.gain,
            layout: opts.layout,
            seed: opts.seed,
            calibration_seed: opts.calibration_seed,
            calibration_sequences: opts.calibration_sequences,
            model,
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyConfig {
    eval: EvalConfig,
    seed: u64,
}

fn eval_batch(c: &ModelConfig, e: &EvalConfig) -> Vec<Vec<u32>> {
    random_batch(c.vocab_size, e.sequences, c.max_seq_len, e.seed)
}

/// One `L × L` attention image per layer and head, for the first sequence.
fn write_heatmaps(run: &mut Run, w: &ModelWeights<f32>, seq: &[u32]) -> Result<()> {
    let t = forward(w, seq, CaptureLevel::Full)?;
    for (l, heads) in t.attn.iter().enumerate() {
        for (h, a) in heads.iter().enumerate() {
            run.write(&format!("heatmaps/layer{l}_head{h}.pgm"), &pgm_p5(&a.cast()))?;
        }
    }
    Ok(())
}

fn outcome(r: &CircuitReport) -> Outcome {
    if r.passes() {
        Outcome::Pass
    } else {
        Outcome::Fail(format!(
            "circuit thresholds not met: ratio {:.3}, direction {:.4}, false positives {:.4}, sink {:.4}",
            r.p0_norm_ratio, r.p0_direction_consistency, r.false_positive_rate, r.downstream_sink_score
        ))
    }
}

pub fn build(common: &Common) -> Result<Outcome> {
    let cfg: BuildConfig = resolve(common.config.as_deref(), json!({ "seed": common.seed }))?;
    let mut run = Run::new("circuit build", &common.out_dir, cfg.seed, &cfg)?;
    let mut opts = BuildOptions::new(&cfg.model);
    opts.spec.gain = cfg.gain;
    opts.layout = cfg.layout.clone();
    opts.seed = cfg.seed;
    opts.calibration_seed = cfg.calibration_seed;
    opts.calibration_sequences = cfg.calibration_sequences;
    let (w, circuit) = build_circuit(&cfg.model, &opts)?;
    let ck = Checkpoint {
        weights: w.clone(),
        optimizer: None,
        meta: json!({ "circuit": circuit }),
    };
    save_checkpoint(&run.path("checkpoint"), &ck)?;
    run.record("checkpoint/manifest.json")?;
    run.record("checkpoint/tensors.bin")?;
    run.write_json("circuit.json", &circuit)?;
    let eval = eval_batch(&cfg.model, &cfg.eval);
    let report = verify_p0_circuit(&w, &circuit, &eval)?;
    run.write_json("report.json", &report)?;
    write_heatmaps(&mut run, &w, &eval[0])?;
    run.finish()?;
    Ok(outcome(&report))
}

fn load_circuit(run: &mut Run, ck: &Checkpoint, file: Option<&Path>) -> Result<InstalledCircuit> {
    match file {
        Some(p) => {
            let bytes = run.input(p)?;
            serde_json::from_slice(&bytes)
                .map_err(|e| Error::Format(format!("circuit {}: {e}", p.display())).into())
        }
        None => match ck.meta.get("circuit") {
            Some(v) => Ok(serde_json::from_value(v.clone())
                .map_err(|e| Error::Format(format!("checkpoint circuit: {e}")))?),
            None => Err(Error::Input("checkpoint has no circuit description; pass --circuit".into()).into()),
        },
    }
}

fn open(run: &mut Run, dir: &Path) -> Result<Checkpoint> {
    run.input(&dir.join("manifest.json"))?;
    run.input(&dir.join("tensors.bin"))?;
    Ok(load_checkpoint(dir)?)
}

pub fn verify(common: &Common, checkpoint: &Path, circuit: Option<&Path>) -> Result<Outcome> {
    let cfg: VerifyConfig = resolve(common.config.as_deref(), json!({ "seed": common.seed }))?;
    let mut run = Run::new("circuit verify", &common.out_dir, cfg.seed, &cfg)?;
    let ck = open(&mut run, checkpoint)?;
    let circ = load_circuit(&mut run, &ck, circuit)?;
    let eval = eval_batch(&ck.weights.config, &cfg.eval);
    let report = verify_p0_circuit(&ck.weights, &circ, &eval)?;
    run.write_json("report.json", &report)?;
    write_heatmaps(&mut run, &ck.weights, &eval[0])?;
    run.finish()?;
    Ok(outcome(&report))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AblateConfig {
    layer: usize,
    eval: EvalConfig,
    seed: u64,
}

#[derive(Serialize)]
struct AblationRow {
    layer: usize,
    head: usize,
    passes: bool,
    report: CircuitReport,
}

pub fn ablate(
    common: &Common,
    checkpoint: &Path,
    circuit: Option<&Path>,
    layer: Option<usize>,
) -> Result<Outcome> {
    let flags = json!({ "layer": layer, "seed": common.seed });
    let cfg: AblateConfig = resolve(common.config.as_deref(), flags)?;
    let mut run = Run::new("ablate", &common.out_dir, cfg.seed, &cfg)?;
    let ck = open(&mut run, checkpoint)?;
    let circ = load_circuit(&mut run, &ck, circuit)?;
    let eval = eval_batch(&ck.weights.config, &cfg.eval);
    let mut rows = Vec::new();
    for head in 0..ck.weights.config.n_heads {
        let w = ablate_head(&ck.weights, cfg.layer, head)?;
        let report = verify_p0_circuit(&w, &circ, &eval)?;
        rows.push(AblationRow {
            layer: cfg.layer,
            head,
            passes: report.passes(),
            report,
        });
    }
    let mut csv = String::from(
        "layer,head,p0_norm_ratio,p0_direction_consistency,false_positive_rate,downstream_sink_score,passes\n",
    );
    for r in &rows {
        let p = &r.report;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.layer,
            r.head,
            p.p0_norm_ratio,
            p.p0_direction_consistency,
            p.false_positive_rate,
            p.downstream_sink_score,
            r.passes
        );
    }
    run.write("ablation.csv", csv.as_bytes())?;
    run.write_json("ablation.json", &rows)?;
    run.finish()?;
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.passes)
        .map(|r| r.head.to_string())
        .collect();
    Ok(if failed.is_empty() {
        Outcome::Pass
    } else {
        Outcome::Fail(format!(
            "thresholds fail with head(s) {} ablated",
            failed.join(", ")
        ))
    })
}
