use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::optim::{clip_grad_norm, AdamW, TrainConfig};
use crate::corpus::TokenStream;
use crate::error::{Error, Result};
use crate::metrics::{sink_report, SinkConfig, SinkReport};
use crate::model::{
    cross_entropy_loss, forward, loss_and_grad, save_checkpoint, CaptureLevel, Checkpoint, ForwardTrace,
    ModelWeights, OptimizerState, Sample,
};
use crate::numerics::RngState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub step: usize,
    pub tokens_seen: usize,
    /// Loss of the batch drawn at this step, before its update.
    pub train_loss: f64,
    /// Next-token loss on the fixed probe batch.
    pub probe_loss: f64,
    pub sink_report: SinkReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_path: Option<PathBuf>,
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    pub sink: SinkConfig,
    /// Checkpoints go to `<out_dir>/step-<n>` at every snapshot.
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub weights: ModelWeights<f32>,
    pub optimizer: OptimizerState,
    pub records: Vec<SnapshotRecord>,
}

/// Seeded random windows of `seq_len + 1` tokens, one draw per step.
pub fn sample_batch(corpus: &TokenStream, cfg: &TrainConfig, step: usize) -> Vec<Sample> {
    let mut rng = RngState::new(cfg.seed).split(step as u64);
    let span = corpus.len() - cfg.seq_len;
    (0..cfg.batch_size)
        .map(|_| {
            let start = rng.below(span);
            Sample::next_token(&corpus.ids[start..start + cfg.seq_len + 1])
        })
        .collect()
}

/// Pooled next-token loss and full traces over the probe batch.
pub fn probe_eval(weights: &ModelWeights<f32>, probe: &[Vec<u32>]) -> Result<(f64, Vec<ForwardTrace<f32>>)> {
    let mut total = 0.0;
    let mut count = 0;
    let mut traces = Vec::with_capacity(probe.len());
    for seq in probe {
        let t = forward(weights, seq, CaptureLevel::Full)?;
        let mut targets = seq[1..].to_vec();
        targets.push(0);
        let mut mask = vec![true; seq.len()];
        mask[seq.len() - 1] = false;
        let v = cross_entropy_loss(&t.logits, &targets, &mask)?;
        total += v.mean * v.count as f64;
        count += v.count;
        traces.push(t);
    }
    Ok((total / count as f64, traces))
}

fn check_inputs(
    weights: &ModelWeights<f32>,
    corpus: &TokenStream,
    cfg: &TrainConfig,
    probe: &[Vec<u32>],
) -> Result<()> {
    cfg.validate()?;
    let c = &weights.config;
    corpus.validate(c.vocab_size)?;
    if cfg.seq_len > c.max_seq_len {
        return Err(Error::Config(format!(
            "seq_len {} exceeds max_seq_len {}",
            cfg.seq_len, c.max_seq_len
        )));
    }
    let needed = (cfg.batch_size * cfg.seq_len).max(cfg.seq_len + 1);
    if corpus.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            have: corpus.len(),
        });
    }
    if probe.is_empty() || probe.iter().any(|s| s.len() < 2) {
        return Err(Error::Input("probe batch needs sequences of length >= 2".into()));
    }
    Ok(())
}

/// AdamW with global-norm clipping. Record `s` describes the weights after
/// `s` updates; snapshots fall on multiples of `snapshot_every` and on the
/// final step. A non-finite loss or gradient stops the run with the path of
/// the last checkpoint written.
pub fn train_loop(
    weights: ModelWeights<f32>,
    corpus: &TokenStream,
    cfg: &TrainConfig,
    probe: &[Vec<u32>],
    opts: &TrainOptions,
) -> Result<TrainRun> {
    check_inputs(&weights, corpus, cfg, probe)?;
    let mut weights = weights;
    let mut opt = AdamW::new(&weights);
    let mut records = Vec::new();
    let mut last_good: Option<PathBuf> = None;
    let tokens_per_step = cfg.batch_size * cfg.seq_len;
    for step in 0..=cfg.steps {
        let batch = sample_batch(corpus, cfg, step);
        let (loss, mut grads) = loss_and_grad(&weights, &batch)?;
        if !loss.mean.is_finite() || !grads.is_finite() {
            return Err(Error::Divergence { step, last_good });
        }
        if step % cfg.snapshot_every == 0 || step == cfg.steps {
            let (probe_loss, traces) = probe_eval(&weights, probe)?;
            let sink_report = sink_report(&traces, &opts.sink)?;
            let checkpoint_path = match &opts.out_dir {
                Some(dir) => {
                    let path = checkpoint_dir(dir, step);
                    save_checkpoint(
                        &path,
                        &Checkpoint {
                            weights: weights.clone(),
                            optimizer: Some(opt.state.clone()),
                            meta: serde_json::json!({
                                "step": step,
                                "tokens_seen": step * tokens_per_step,
                                "train_config": cfg,
                            }),
                        },
                    )?;
                    last_good = Some(path.clone());
                    Some(path)
                }
                None => None,
            };
            records.push(SnapshotRecord {
                step,
                tokens_seen: step * tokens_per_step,
                train_loss: loss.mean,
                probe_loss,
                sink_report,
                checkpoint_path,
            });
        }
        if step == cfg.steps {
            break;
        }
        clip_grad_norm(&mut grads, cfg.grad_clip);
        opt.step(&mut weights, &grads, cfg);
    }
    Ok(TrainRun {
        weights,
        optimizer: opt.state,
        records,
    })
}

pub fn checkpoint_dir(root: &Path, step: usize) -> PathBuf {
    root.join(format!("step-{step:06}"))
}
