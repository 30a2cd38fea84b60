use std::path::PathBuf;

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sinklab::circuit::random_batch;
use sinklab::corpus::SAMPLE_TEXT;
use sinklab::metrics::{matrix_csv, norm_profile, pgm_p5, scaled_pgm, sink_report, SinkConfig};
use sinklab::model::{attention_output_norms, forward, forward_batch, CaptureLevel, LayerStep};
use sinklab::numerics::DenseMatrix;

use super::{read_corpus, Init, ModelSource};
use crate::config::resolve;
use crate::output::Run;
use crate::{Common, ModelArgs, Outcome};

fn source_flags(model: &ModelArgs) -> Result<serde_json::Value> {
    Ok(json!({
        "checkpoint": model.checkpoint,
        "init": Init::parse(model.init.as_deref())?,
    }))
}

fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn step_labels(n: usize) -> Vec<String> {
    (0..n).map(|s| LayerStep(s).to_string()).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceConfig {
    source: ModelSource,
    /// Byte-tokenized and cut to the model's context length.
    text: String,
    capture: String,
    seed: u64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            source: ModelSource::default(),
            text: SAMPLE_TEXT.chars().take(64).collect(),
            capture: "full".into(),
            seed: 0,
        }
    }
}

#[derive(Serialize)]
struct TraceSummary {
    tokens: Vec<u32>,
    capture: String,
    n_layers: usize,
    hidden_steps: usize,
    logits_shape: [usize; 2],
}

pub fn trace(
    common: &Common,
    model: &ModelArgs,
    text: Option<String>,
    capture: Option<String>,
) -> Result<Outcome> {
    let flags = json!({
        "source": source_flags(model)?,
        "text": text,
        "capture": capture,
        "seed": common.seed,
    });
    let cfg: TraceConfig = resolve(common.config.as_deref(), flags)?;
    let level: CaptureLevel = cfg.capture.parse()?;
    let mut run = Run::new("trace", &common.out_dir, cfg.seed, &cfg)?;
    let w = cfg.source.load(&mut run, cfg.seed)?;
    let tokens: Vec<u32> = cfg
        .text
        .bytes()
        .take(w.config.max_seq_len)
        .map(u32::from)
        .collect();
    let t = forward(&w, &tokens, level)?;
    let positions = labels("", t.len());
    run.write("logits.csv", matrix_csv(&t.logits.cast(), &positions).as_bytes())?;
    if level != CaptureLevel::Logits {
        let norms = norm_profile(std::slice::from_ref(&t))?;
        run.write(
            "hidden_norms.csv",
            matrix_csv(&norms, &step_labels(norms.rows())).as_bytes(),
        )?;
        run.write("hidden_norms.pgm", &scaled_pgm(&norms))?;
        let rows = (0..t.n_layers())
            .map(|l| attention_output_norms(&t, l))
            .collect::<sinklab::Result<Vec<_>>>()?;
        let attn_norms = DenseMatrix::from_rows(&rows)?;
        let layers = labels("", attn_norms.rows());
        run.write("attn_out_norms.csv", matrix_csv(&attn_norms, &layers).as_bytes())?;
    }
    if level == CaptureLevel::Full {
        for (l, heads) in t.attn.iter().enumerate() {
            for (h, a) in heads.iter().enumerate() {
                run.write(&format!("attention/layer{l}_head{h}.pgm"), &pgm_p5(&a.cast()))?;
            }
        }
    }
    let summary = TraceSummary {
        tokens,
        capture: cfg.capture.clone(),
        n_layers: t.n_layers(),
        hidden_steps: t.hidden.len(),
        logits_shape: [t.logits.rows(), t.logits.cols()],
    };
    run.write_json("trace.json", &summary)?;
    run.finish()?;
    Ok(Outcome::Pass)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeConfig {
    sequences: usize,
    len: usize,
    seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            sequences: 64,
            len: 64,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricsConfig {
    source: ModelSource,
    sink: SinkConfig,
    probe: ProbeConfig,
    /// Probe windows are cut from this corpus instead of drawn at random.
    corpus: Option<PathBuf>,
    seed: u64,
}

pub fn metrics(common: &Common, model: &ModelArgs, corpus: Option<PathBuf>) -> Result<Outcome> {
    let flags = json!({
        "source": source_flags(model)?,
        "corpus": corpus,
        "seed": common.seed,
    });
    let cfg: MetricsConfig = resolve(common.config.as_deref(), flags)?;
    let mut run = Run::new("metrics", &common.out_dir, cfg.seed, &cfg)?;
    let w = cfg.source.load(&mut run, cfg.seed)?;
    let p = &cfg.probe;
    let batch: Vec<Vec<u32>> = match &cfg.corpus {
        Some(path) => {
            let s = read_corpus(&mut run, Some(path))?;
            s.documents()
                .flat_map(|d| d.chunks_exact(p.len))
                .take(p.sequences)
                .map(<[u32]>::to_vec)
                .collect()
        }
        None => random_batch(w.config.vocab_size, p.sequences, p.len, p.seed),
    };
    if batch.is_empty() {
        return Err(sinklab::Error::InsufficientData {
            needed: p.len,
            have: 0,
        }
        .into());
    }
    let traces = forward_batch(&w, &batch, CaptureLevel::Full)?;
    let rep = sink_report(&traces, &cfg.sink)?;
    let layers = labels("", rep.avg_attn_to_p0.rows());
    run.write("sink_report.json", &serde_json::to_vec_pretty(&rep)?)?;
    run.write(
        "avg_attn_to_p0.csv",
        matrix_csv(&rep.avg_attn_to_p0, &layers).as_bytes(),
    )?;
    run.write("avg_attn_to_p0.pgm", &pgm_p5(&rep.avg_attn_to_p0))?;
    let steps = step_labels(rep.norm_profile.rows());
    run.write(
        "norm_profile.csv",
        matrix_csv(&rep.norm_profile, &steps).as_bytes(),
    )?;
    run.write("cos_to_mean.csv", matrix_csv(&rep.cos_to_mean, &steps).as_bytes())?;
    run.finish()?;
    eprintln!(
        "metrics: stage {}, emergence {:?}, center {:?}",
        rep.stage, rep.emergence_layer, rep.sink_center
    );
    Ok(Outcome::Pass)
}
