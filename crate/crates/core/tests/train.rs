use sinklab::circuit::build_default_circuit;
use sinklab::corpus::{TokenStream, SAMPLE_TEXT};
use sinklab::metrics::{classify_stage, SinkReport, Stage};
use sinklab::model::{
    forward, load_checkpoint, save_checkpoint, CaptureLevel, Checkpoint, ModelConfig, ModelWeights, Sample,
};
use sinklab::numerics::{DenseMatrix, RngState};
use sinklab::train::{
    gradient_check, init_weights, sample_param_subset, stage_timeline, timeline_csv, train_loop,
    SnapshotRecord, TrainConfig, TrainOptions,
};
use sinklab::Error;

fn small_config() -> ModelConfig {
    ModelConfig {
        n_layers: 2,
        d_model: 32,
        n_heads: 2,
        d_ff: 64,
        vocab_size: 256,
        max_seq_len: 64,
        ..ModelConfig::default()
    }
}

fn bytes(s: &str) -> Vec<u32> {
    s.bytes().map(u32::from).collect()
}

fn probe() -> Vec<Vec<u32>> {
    SAMPLE_TEXT
        .as_bytes()
        .chunks(16)
        .skip(40)
        .take(4)
        .map(|c| c.iter().map(|&b| b as u32).collect())
        .collect()
}

fn random_f64(c: &ModelConfig, seed: u64) -> ModelWeights<f64> {
    let mut w = ModelWeights::<f64>::zeros(c).unwrap();
    let mut rng = RngState::new(seed);
    for (name, _, t) in w.tensors_mut() {
        let s = if name.ends_with("norm") { 0.1 } else { 0.4 };
        t.iter_mut().for_each(|x| *x += s * rng.normal());
    }
    w
}

fn grad_batch() -> Vec<Sample> {
    vec![
        Sample::next_token(&[3, 1, 4, 1, 5, 9, 2, 6]),
        Sample {
            input: vec![2, 7, 1, 8],
            targets: vec![2, 8, 1, 8],
            mask: vec![true, false, true, true],
        },
    ]
}

#[test]
fn memorizes_a_single_document() {
    let doc: Vec<u32> = SAMPLE_TEXT.bytes().take(65).map(u32::from).collect();
    let corpus = TokenStream::from_documents([(doc, false)]);
    let cfg = TrainConfig {
        steps: 500,
        batch_size: 1,
        seq_len: 64,
        snapshot_every: 100,
        ..TrainConfig::default()
    };
    let w = init_weights::<f32>(&ModelConfig::default(), 3).unwrap();
    let t = std::time::Instant::now();
    let run = train_loop(w, &corpus, &cfg, &probe(), &TrainOptions::default()).unwrap();
    let first = run.records.first().unwrap().train_loss;
    let last = run.records.last().unwrap().train_loss;
    assert!(t.elapsed().as_secs() < 300);
    let steps: Vec<usize> = run.records.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![0, 100, 200, 300, 400, 500]);
    assert!(last <= 0.1 * first, "{first} -> {last}");
    assert_eq!(run.optimizer.step, 500);
}

fn short_run(seed: u64, out: Option<std::path::PathBuf>) -> Vec<SnapshotRecord> {
    let corpus = TokenStream::from_documents([(bytes(&SAMPLE_TEXT[..2000]), false)]);
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        steps: 30,
        batch_size: 4,
        seq_len: 32,
        snapshot_every: 10,
        seed,
        ..TrainConfig::default()
    };
    let w = init_weights::<f32>(&small_config(), seed).unwrap();
    let opts = TrainOptions {
        out_dir: out,
        ..TrainOptions::default()
    };
    train_loop(w, &corpus, &cfg, &probe(), &opts).unwrap().records
}

#[test]
fn same_seed_same_losses() {
    let a = short_run(9, None);
    let b = short_run(9, None);
    let la: Vec<f64> = a.iter().map(|r| r.train_loss).collect();
    let lb: Vec<f64> = b.iter().map(|r| r.train_loss).collect();
    assert_eq!(la, lb);
    assert_eq!(a, b);
    let c = short_run(10, None);
    assert_ne!(la, c.iter().map(|r| r.train_loss).collect::<Vec<_>>());
    assert!(a.last().unwrap().probe_loss < a[0].probe_loss);
}

#[test]
fn snapshots_write_loadable_checkpoints() {
    let dir = std::env::temp_dir().join(format!("sinklab-train-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    let recs = short_run(4, Some(dir.clone()));
    let last = recs.last().unwrap();
    let path = last.checkpoint_path.as_ref().unwrap();
    let ck = load_checkpoint(path).unwrap();
    assert_eq!(ck.optimizer.as_ref().unwrap().step, 30);
    assert_eq!(ck.meta["step"], 30);
    let again = short_run(4, None);
    assert_eq!(again.last().unwrap().train_loss, last.train_loss);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn checkpoint_round_trip_gives_identical_logits() {
    let w = init_weights::<f32>(&small_config(), 8).unwrap();
    let dir = std::env::temp_dir().join(format!("sinklab-ck-{}", std::process::id()));
    save_checkpoint(&dir, &Checkpoint::weights_only(w.clone())).unwrap();
    let back = load_checkpoint(&dir).unwrap().weights;
    let toks = bytes("round trip");
    let a = forward(&w, &toks, CaptureLevel::Logits).unwrap().logits;
    let b = forward(&back, &toks, CaptureLevel::Logits).unwrap().logits;
    assert_eq!(a.as_slice(), b.as_slice());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn zero_steps_gives_one_untrained_snapshot() {
    let corpus = TokenStream::from_documents([(bytes(&SAMPLE_TEXT[..500]), false)]);
    let cfg = TrainConfig {
        steps: 0,
        batch_size: 2,
        seq_len: 32,
        ..TrainConfig::default()
    };
    let w = init_weights::<f32>(&small_config(), 1).unwrap();
    let run = train_loop(w.clone(), &corpus, &cfg, &probe(), &TrainOptions::default()).unwrap();
    assert_eq!(run.records.len(), 1);
    assert_eq!(run.records[0].step, 0);
    assert_eq!(run.records[0].tokens_seen, 0);
    assert_eq!(run.weights, w);
    assert_eq!(run.records[0].sink_report.stage, Stage::PreEmergent);
}

#[test]
fn short_corpus_is_rejected() {
    let corpus = TokenStream::from_documents([(bytes("too short"), false)]);
    let cfg = TrainConfig {
        seq_len: 32,
        ..TrainConfig::default()
    };
    let w = init_weights::<f32>(&small_config(), 1).unwrap();
    let err = train_loop(w, &corpus, &cfg, &probe(), &TrainOptions::default()).unwrap_err();
    assert!(matches!(err, Error::InsufficientData { .. }));
}

#[test]
fn divergence_is_reported() {
    let corpus = TokenStream::from_documents([(bytes(&SAMPLE_TEXT[..500]), false)]);
    let cfg = TrainConfig {
        steps: 3,
        batch_size: 2,
        seq_len: 16,
        ..TrainConfig::default()
    };
    let mut w = init_weights::<f32>(&small_config(), 1).unwrap();
    w.lm_head.set(0, 0, f32::NAN);
    let err = train_loop(w, &corpus, &cfg, &probe(), &TrainOptions::default()).unwrap_err();
    assert!(matches!(
        err,
        Error::Divergence {
            step: 0,
            last_good: None
        }
    ));
}

#[test]
fn gradient_check_on_the_small_block() {
    let w = random_f64(&ModelConfig::tiny(), 12);
    let subset = sample_param_subset(&w, 4, 2);
    let r = gradient_check(&w, &grad_batch(), &subset, 1e-4).unwrap();
    assert_eq!(r.checked, subset.len());
    assert!(r.max_rel_error <= 1e-4, "{r:?}");
}

#[test]
fn gradient_check_without_blocks() {
    let c = ModelConfig {
        n_layers: 0,
        ..ModelConfig::tiny()
    };
    let w = random_f64(&c, 5);
    let subset = sample_param_subset(&w, 8, 3);
    let r = gradient_check(&w, &grad_batch(), &subset, 1e-4).unwrap();
    assert!(r.max_rel_error <= 1e-6, "{r:?}");
}

#[test]
fn masked_batch_checks_against_zero() {
    let w = random_f64(&ModelConfig::tiny(), 6);
    let batch = vec![Sample {
        input: vec![1, 2, 3],
        targets: vec![2, 3, 4],
        mask: vec![false; 3],
    }];
    let subset = sample_param_subset(&w, 2, 0);
    let r = gradient_check(&w, &batch, &subset, 1e-4).unwrap();
    assert_eq!(r.max_rel_error, 0.0);
}

fn synthetic(step: usize, emergence: Option<usize>, center: Option<usize>) -> SnapshotRecord {
    let empty = DenseMatrix::zeros(0, 0);
    SnapshotRecord {
        step,
        tokens_seen: step * 100,
        train_loss: 1.0,
        probe_loss: 1.0,
        sink_report: SinkReport {
            sink_rate: 0.0,
            norm_profile: empty.clone(),
            cos_to_mean: empty.clone(),
            avg_attn_to_p0: empty,
            emergence_layer: emergence,
            sink_center: center,
            stage: classify_stage(emergence, center),
        },
        checkpoint_path: None,
    }
}

#[test]
fn synthetic_arc_reads_as_four_stages() {
    let recs = vec![
        synthetic(30, Some(2), Some(0)),
        synthetic(0, None, None),
        synthetic(10, Some(12), Some(0)),
        synthetic(20, Some(2), Some(1)),
    ];
    let stages: Vec<Stage> = stage_timeline(&recs).iter().map(|r| r.stage).collect();
    assert_eq!(
        stages,
        vec![
            Stage::PreEmergent,
            Stage::Early,
            Stage::Transitional,
            Stage::Final
        ]
    );
    let csv = timeline_csv(&stage_timeline(&recs));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "step,tokens,loss,stage,emergence_layer,sink_center");
    assert_eq!(lines[1], "0,0,1,pre-emergent,,");
    assert_eq!(lines[2], "10,1000,1,early,12,0");
}

#[test]
fn circuit_and_untrained_timelines_are_constant() {
    let (w, _) = build_default_circuit(&ModelConfig::default()).unwrap();
    let corpus = TokenStream::from_documents([(bytes(&SAMPLE_TEXT[..1000]), false)]);
    let cfg = TrainConfig {
        steps: 0,
        batch_size: 2,
        seq_len: 32,
        ..TrainConfig::default()
    };
    let circuit_probe: Vec<Vec<u32>> = (0..8u64)
        .map(|s| {
            let mut rng = RngState::new(100 + s);
            (0..64).map(|_| rng.below(256) as u32).collect()
        })
        .collect();
    let run = train_loop(w, &corpus, &cfg, &circuit_probe, &TrainOptions::default()).unwrap();
    let tl = stage_timeline(&run.records);
    assert!(tl.iter().all(|r| r.stage == Stage::Final));

    let w0 = init_weights::<f32>(&ModelConfig::default(), 2).unwrap();
    let run0 = train_loop(w0, &corpus, &cfg, &circuit_probe, &TrainOptions::default()).unwrap();
    assert!(stage_timeline(&run0.records)
        .iter()
        .all(|r| r.stage == Stage::PreEmergent));
}
