use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sinklab::corpus::TokenStream;
use sinklab::metrics::SinkConfig;
use sinklab::model::{ModelConfig, ModelWeights};
use sinklab::numerics::RngState;
use sinklab::train::{
    init_weights, stage_timeline, timeline_csv, train_loop, SnapshotRecord, TrainConfig, TrainOptions,
};
use sinklab::Error;

use super::{read_corpus, Init};
use crate::config::resolve;
use crate::output::Run;
use crate::{Common, Outcome};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeConfig {
    sequences: usize,
    len: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainCmdConfig {
    model: ModelConfig,
    init: Init,
    train: TrainConfig,
    corpus: Option<PathBuf>,
    /// Tail share of the corpus kept out of training; probe windows come
    /// from it.
    holdout_fraction: f64,
    probe: ProbeConfig,
    sink: SinkConfig,
    seed: u64,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            init: Init::Random,
            train: TrainConfig::default(),
            corpus: None,
            holdout_fraction: 0.1,
            probe: ProbeConfig {
                sequences: 64,
                len: 64,
            },
            sink: SinkConfig::default(),
            seed: 0,
        }
    }
}

/// Splits at token `cut`, keeping document boundaries on both sides.
fn split_stream(s: &TokenStream, cut: usize) -> (TokenStream, TokenStream) {
    let mut head = TokenStream::default();
    let mut tail = TokenStream::default();
    for (d, doc) in s.documents().enumerate() {
        let start = s.doc_boundaries[d];
        let k = cut.saturating_sub(start).min(doc.len());
        head.push_document(&doc[..k], s.has_bos[d]);
        tail.push_document(&doc[k..], false);
    }
    (head, tail)
}

fn probe_windows(tail: &TokenStream, p: &ProbeConfig, seed: u64) -> Result<Vec<Vec<u32>>> {
    if p.len < 2 || tail.len() < p.len {
        return Err(Error::InsufficientData {
            needed: p.len.max(2),
            have: tail.len(),
        }
        .into());
    }
    let mut rng = RngState::new(seed).split(u64::MAX);
    let span = tail.len() - p.len + 1;
    Ok((0..p.sequences)
        .map(|_| {
            let s = rng.below(span);
            tail.ids[s..s + p.len].to_vec()
        })
        .collect())
}

fn relative(p: &Path, root: &Path) -> PathBuf {
    p.strip_prefix(root)
        .map(Path::to_path_buf)
        .unwrap_or_else(|_| p.to_path_buf())
}

pub fn train(
    common: &Common,
    corpus: Option<PathBuf>,
    steps: Option<usize>,
    init: Option<String>,
) -> Result<Outcome> {
    let flags = json!({
        "corpus": corpus,
        "init": Init::parse(init.as_deref())?,
        "train": { "steps": steps },
        "seed": common.seed,
    });
    let mut cfg: TrainCmdConfig = resolve(common.config.as_deref(), flags)?;
    cfg.train.seed = cfg.seed;
    if !(0.0..1.0).contains(&cfg.holdout_fraction) || cfg.holdout_fraction == 0.0 {
        return Err(Error::Config("holdout_fraction must be in (0, 1)".into()).into());
    }
    let mut run = Run::new("train", &common.out_dir, cfg.seed, &cfg)?;
    let stream = read_corpus(&mut run, cfg.corpus.as_deref())?;
    let cut = ((1.0 - cfg.holdout_fraction) * stream.len() as f64).floor() as usize;
    let (train_part, held_out) = split_stream(&stream, cut);
    let probe = probe_windows(&held_out, &cfg.probe, cfg.seed)?;
    let weights: ModelWeights<f32> = match cfg.init {
        Init::Random => init_weights(&cfg.model, cfg.seed)?,
        Init::Zero => ModelWeights::zeros(&cfg.model)?,
    };
    let opts = TrainOptions {
        sink: cfg.sink.clone(),
        out_dir: Some(run.path("checkpoints")),
    };
    let result = train_loop(weights, &train_part, &cfg.train, &probe, &opts)?;
    let mut records = result.records;
    for r in &mut records {
        if let Some(p) = &r.checkpoint_path {
            let rel = relative(p, &run.out_dir);
            for part in ["manifest.json", "tensors.bin"] {
                run.record(&rel.join(part).to_string_lossy())?;
            }
            r.checkpoint_path = Some(rel);
        }
    }
    run.write_json("records.json", &records)?;
    run.write("timeline.csv", timeline_csv(&stage_timeline(&records)).as_bytes())?;
    run.finish()?;
    if let (Some(a), Some(b)) = (records.first(), records.last()) {
        eprintln!(
            "train: {} snapshots, probe loss {:.4} -> {:.4}, final stage {}",
            records.len(),
            a.probe_loss,
            b.probe_loss,
            b.sink_report.stage
        );
    }
    Ok(Outcome::Pass)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimelineConfig {
    seed: u64,
}

pub fn timeline(common: &Common, records: &Path) -> Result<Outcome> {
    let cfg: TimelineConfig = resolve(common.config.as_deref(), json!({ "seed": common.seed }))?;
    let mut run = Run::new("timeline", &common.out_dir, cfg.seed, &cfg)?;
    let bytes = run.input(records)?;
    let recs: Vec<SnapshotRecord> = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Format(format!("records {}: {e}", records.display())))?;
    if recs.is_empty() {
        return Err(Error::Input("no records".into()).into());
    }
    let rows = stage_timeline(&recs);
    run.write("timeline.csv", timeline_csv(&rows).as_bytes())?;
    run.write_json("timeline.json", &rows)?;
    run.finish()?;
    Ok(Outcome::Pass)
}
