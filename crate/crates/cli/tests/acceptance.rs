//! The twelve acceptance criteria, one PASS/FAIL line each.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use sinklab::circuit::{
    build_default_circuit, build_uniform_attention_layer, negative_control, random_batch, verify_p0_circuit,
};
use sinklab::conemodel::{mixing_curve, sample_cone_vector, ConeParams, MixingSpec};
use sinklab::corpus::{build_repeat_variants, ngram_repeat_proportion, TokenStream, SAMPLE_TEXT};
use sinklab::metrics::{ablate_head, avg_attn_to_position, classify_stage, sink_rate, SinkReport, Stage};
use sinklab::model::{
    attention_output_norms, forward, load_checkpoint, save_checkpoint, CaptureLevel, Checkpoint,
    ForwardTrace, ModelConfig, ModelWeights, Sample,
};
use sinklab::numerics::{dot, norm_stability_sweep, rms_jacobian_check, DenseMatrix, Matrix, RngState};
use sinklab::train::{
    gradient_check, init_weights, sample_param_subset, stage_timeline, train_loop, SnapshotRecord,
    TrainConfig, TrainOptions,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_cone_mixing() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut l1_exact = true;
    for alpha in [0.0, 0.3, 0.6, 0.9] {
        let rows = mixing_curve(&MixingSpec {
            alpha,
            lengths: vec![1, 2, 8, 32],
            trials: 100_000,
            dim: 64,
            seed: 2024,
            ..MixingSpec::default()
        })
        .map_err(|e| e.to_string())?;
        for r in rows {
            let oracle = alpha * alpha + (1.0 - alpha * alpha) / r.l as f64;
            if r.l == 1 {
                l1_exact &= r.mc_mean == 1.0 && r.analytic == 1.0;
            } else {
                worst = worst.max((r.mc_mean - oracle).abs() / r.mc_stderr);
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    check(
        worst <= 4.0 && l1_exact && secs <= 60.0,
        format!("max |z| {worst:.2}, l=1 exact {l1_exact}, {secs:.1}s"),
    )
}

fn c2_pairwise_dot() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, alpha) in [0.0, 0.5, 0.9].into_iter().enumerate() {
        let mut rng = RngState::new(77).split(k as u64);
        let params = ConeParams::random_axis(alpha, 64, &mut rng).map_err(|e| e.to_string())?;
        let n = 100_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let a = sample_cone_vector(&params, &mut rng);
            let b = sample_cone_vector(&params, &mut rng);
            let x = dot(&a, &b);
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = (s2 / n as f64 - mean * mean) * n as f64 / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        worst = worst.max((mean - alpha * alpha).abs() / se);
    }
    check(worst <= 4.0, format!("max |z| {worst:.2}"))
}

fn c3_rmsnorm_jacobian() -> Outcome {
    let mut err: f64 = 0.0;
    let mut par: f64 = 0.0;
    for d in [4, 32, 256] {
        let r = rms_jacobian_check(d, 100, 1e-4, 31 + d as u64).map_err(|e| e.to_string())?;
        err = err.max(r.max_abs_error);
        par = par.max(r.parallel_change);
    }
    let sweep = norm_stability_sweep(64, &[1.0, 100.0], 0.1, 100, 5).map_err(|e| e.to_string())?;
    let ratio = sweep[1].ratio_to_first;
    check(
        err <= 1e-5 && par <= 1e-10 && ratio <= 0.02,
        format!("max error {err:.2e}, parallel {par:.2e}, gain-100 ratio {ratio:.4}"),
    )
}

fn c4_uniform_heads() -> Outcome {
    let c = ModelConfig::default();
    let mut w = init_weights::<f32>(&c, 4).map_err(|e| e.to_string())?;
    for lw in &mut w.layers {
        lw.wq.fill(0.0);
        lw.wk.fill(0.0);
    }
    let seq = &random_batch(c.vocab_size, 1, 64, 8)[0];
    let t = forward(&w, seq, CaptureLevel::Full).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for heads in &t.attn {
        for a in heads {
            for i in 0..64 {
                for j in 0..64 {
                    let want = if j <= i { 1.0 / (i + 1) as f64 } else { 0.0 };
                    worst = worst.max((a.get(i, j) as f64 - want).abs());
                }
            }
        }
    }
    check(worst <= 1e-6, format!("max deviation {worst:.2e} over 16 heads"))
}

fn c5_position_asymmetry() -> Outcome {
    let c = ModelConfig::default();
    let mut wins = 0;
    for seed in 0..200u64 {
        let mut w = init_weights::<f32>(&c, seed).map_err(|e| e.to_string())?;
        let mut rng = RngState::new(seed).split(1);
        build_uniform_attention_layer(&mut w, 0, &mut rng).map_err(|e| e.to_string())?;
        let batch = random_batch(c.vocab_size, 8, 64, 1000 + seed);
        let (mut at0, mut at32) = (0.0, 0.0);
        for s in &batch {
            let t = forward(&w, s, CaptureLevel::Hidden).map_err(|e| e.to_string())?;
            let n = attention_output_norms(&t, 0).map_err(|e| e.to_string())?;
            at0 += n[0];
            at32 += n[32];
        }
        if at0 > at32 {
            wins += 1;
        }
    }
    check(
        wins >= 190,
        format!("{wins}/200 runs with position 0 above position 32"),
    )
}

fn c6_circuit() -> Outcome {
    let t = Instant::now();
    let c = ModelConfig::default();
    let (w, circ) = build_default_circuit(&c).map_err(|e| e.to_string())?;
    let eval = random_batch(c.vocab_size, 100, c.max_seq_len, 99);
    let r = verify_p0_circuit(&w, &circ, &eval).map_err(|e| e.to_string())?;
    let neg = verify_p0_circuit(&negative_control(&w, &circ), &circ, &eval).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let ok = r.passes()
        && r.held_out
        && (0.5..=2.0).contains(&neg.p0_norm_ratio)
        && neg.downstream_sink_score <= 0.3
        && secs <= 120.0;
    check(
        ok,
        format!(
            "ratio {:.2}, direction {:.4}, fp {:.4}, sink {:.4}; control ratio {:.3}, sink {:.3}; {secs:.1}s",
            r.p0_norm_ratio,
            r.p0_direction_consistency,
            r.false_positive_rate,
            r.downstream_sink_score,
            neg.p0_norm_ratio,
            neg.downstream_sink_score
        ),
    )
}

fn c7_ablation() -> Outcome {
    let c = ModelConfig::default();
    let (w, circ) = build_default_circuit(&c).map_err(|e| e.to_string())?;
    let eval = random_batch(c.vocab_size, 100, c.max_seq_len, 99);
    let mut min_ratio = f64::INFINITY;
    let mut all = true;
    for h in 0..c.n_heads {
        let a = ablate_head(&w, 0, h).map_err(|e| e.to_string())?;
        let r = verify_p0_circuit(&a, &circ, &eval).map_err(|e| e.to_string())?;
        all &= r.passes();
        min_ratio = min_ratio.min(r.p0_norm_ratio);
    }
    check(
        all,
        format!(
            "{} heads ablated one at a time, min ratio {min_ratio:.2}",
            c.n_heads
        ),
    )
}

fn synthetic_traces(len: usize, row: impl Fn(usize) -> Vec<f64>) -> Vec<ForwardTrace<f64>> {
    let m = Matrix::from_rows(&(0..len).map(&row).collect::<Vec<_>>()).unwrap();
    let attn = vec![vec![m; 4]; 4];
    vec![ForwardTrace::from_attention(attn).unwrap()]
}

fn c8_sink_rate() -> Outcome {
    let len = 64;
    let uniform = synthetic_traces(len, |i| {
        (0..len)
            .map(|j| if j <= i { 1.0 / (i + 1) as f64 } else { 0.0 })
            .collect()
    });
    let sink = synthetic_traces(len, |_| {
        (0..len).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect()
    });
    let mut harmonic = 0.0;
    for i in 0..len {
        harmonic += 1.0 / (i as f64 + 1.0);
    }
    let oracle = harmonic / len as f64;
    let avg = avg_attn_to_position(&uniform, 0).map_err(|e| e.to_string())?;
    let gap = avg
        .as_slice()
        .iter()
        .map(|v| (v - oracle).abs())
        .fold(0.0, f64::max);
    let r0 = sink_rate(&uniform, 0.3, 0).map_err(|e| e.to_string())?;
    let r1 = sink_rate(&sink, 0.3, 0).map_err(|e| e.to_string())?;
    check(
        r0 == 0.0 && r1 == 1.0 && gap <= 1e-12 && (oracle - 0.0741).abs() < 1e-4,
        format!("uniform rate {r0}, all-sink rate {r1}, mean to P0 {oracle:.4} (gap {gap:.1e})"),
    )
}

fn brute_force(docs: &[Vec<u32>], n: usize) -> Option<(usize, usize)> {
    let (mut hits, mut windows) = (0, 0);
    for d in docs {
        if d.len() < n {
            continue;
        }
        for s in 0..=d.len() - n {
            windows += 1;
            let w = &d[s..s + n];
            if w.iter().all(|a| w.iter().all(|b| a == b)) {
                hits += 1;
            }
        }
    }
    (windows > 0).then_some((hits, windows))
}

fn c9_corpus() -> Outcome {
    let mut rng = RngState::new(9);
    let mut mismatches = 0;
    let mut non_monotone = 0;
    for _ in 0..1000 {
        let vocab = 1 + rng.below(4) as u32;
        let docs: Vec<Vec<u32>> = (0..1 + rng.below(3))
            .map(|_| {
                (0..1 + rng.below(40))
                    .map(|_| rng.below(vocab as usize) as u32)
                    .collect()
            })
            .collect();
        let s = TokenStream::from_documents(docs.iter().map(|d| (d, false)));
        let mut prev: Option<f64> = None;
        for n in 2..=6 {
            let got = ngram_repeat_proportion(&s, n).ok();
            let want = brute_force(&docs, n).map(|(h, w)| h as f64 / w as f64);
            if got != want {
                mismatches += 1;
            }
            if let (Some(p), Some(g)) = (prev, got) {
                if g > p {
                    non_monotone += 1;
                }
            }
            prev = got.or(prev);
        }
    }
    let mut parity_breaks = 0;
    for _ in 0..100 {
        let len = 1 + rng.below(50);
        let doc: Vec<u32> = (0..len).map(|_| 1 + rng.below(255) as u32).collect();
        for n in 1..=8 {
            let (_, a) = build_repeat_variants(&doc, n, true, 0).map_err(|e| e.to_string())?;
            let (_, b) = build_repeat_variants(&doc, n, false, 0).map_err(|e| e.to_string())?;
            let ca = a.iter().filter(|&&m| m).count();
            let cb = b.iter().filter(|&&m| m).count();
            if ca != cb || ca != len - 1 {
                parity_breaks += 1;
            }
        }
    }
    check(
        mismatches == 0 && non_monotone == 0 && parity_breaks == 0,
        format!(
            "{mismatches} scanner mismatches, {non_monotone} monotonicity breaks, {parity_breaks} parity breaks"
        ),
    )
}

fn record(step: usize, e: Option<usize>, c: Option<usize>) -> SnapshotRecord {
    let empty = DenseMatrix::zeros(0, 0);
    SnapshotRecord {
        step,
        tokens_seen: step,
        train_loss: 0.0,
        probe_loss: 0.0,
        sink_report: SinkReport {
            sink_rate: 0.0,
            norm_profile: empty.clone(),
            cos_to_mean: empty.clone(),
            avg_attn_to_p0: empty,
            emergence_layer: e,
            sink_center: c,
            stage: classify_stage(e, c),
        },
        checkpoint_path: None,
    }
}

fn c10_stages() -> Outcome {
    let recs = [
        record(0, None, None),
        record(1, Some(12), Some(0)),
        record(2, Some(2), Some(1)),
        record(3, Some(2), Some(0)),
    ];
    let got: Vec<Stage> = stage_timeline(&recs).iter().map(|r| r.stage).collect();
    let want = [
        Stage::PreEmergent,
        Stage::Early,
        Stage::Transitional,
        Stage::Final,
    ];
    let names: Vec<&str> = got.iter().map(|s| s.as_str()).collect();
    check(got == want, names.join(" -> "))
}

fn c11_training() -> Outcome {
    let tiny = ModelConfig::tiny();
    let mut w64 = ModelWeights::<f64>::zeros(&tiny).map_err(|e| e.to_string())?;
    let mut rng = RngState::new(21);
    for (name, _, t) in w64.tensors_mut() {
        let s = if name.ends_with("norm") { 0.1 } else { 0.4 };
        t.iter_mut().for_each(|x| *x += s * rng.normal());
    }
    let batch = vec![
        Sample::next_token(&[3, 1, 4, 1, 5, 9, 2, 6, 5, 3]),
        Sample::next_token(&[2, 7, 1, 8, 2, 8]),
    ];
    let subset = sample_param_subset(&w64, 5, 1);
    let gc = gradient_check(&w64, &batch, &subset, 1e-4).map_err(|e| e.to_string())?;

    let t = Instant::now();
    let doc: Vec<u32> = SAMPLE_TEXT.bytes().take(65).map(u32::from).collect();
    let corpus = TokenStream::from_documents([(doc, false)]);
    let cfg = TrainConfig {
        steps: 500,
        batch_size: 1,
        seq_len: 64,
        snapshot_every: 500,
        ..TrainConfig::default()
    };
    let probe = vec![SAMPLE_TEXT.bytes().skip(100).take(32).map(u32::from).collect()];
    let w = init_weights::<f32>(&ModelConfig::default(), 3).map_err(|e| e.to_string())?;
    let run = train_loop(w, &corpus, &cfg, &probe, &TrainOptions::default()).map_err(|e| e.to_string())?;
    let first = run.records[0].train_loss;
    let last = run.records.last().unwrap().train_loss;
    let secs = t.elapsed().as_secs_f64();

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    save_checkpoint(dir.path(), &Checkpoint::weights_only(run.weights.clone())).map_err(|e| e.to_string())?;
    let back = load_checkpoint(dir.path()).map_err(|e| e.to_string())?.weights;
    let toks: Vec<u32> = SAMPLE_TEXT.bytes().take(64).map(u32::from).collect();
    let a = forward(&run.weights, &toks, CaptureLevel::Logits).map_err(|e| e.to_string())?;
    let b = forward(&back, &toks, CaptureLevel::Logits).map_err(|e| e.to_string())?;
    let bits = |m: &Matrix<f32>| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let identical = back == run.weights && bits(&a.logits) == bits(&b.logits);

    check(
        gc.max_rel_error <= 1e-4 && last <= 0.1 * first && secs <= 300.0 && identical,
        format!(
            "grad rel error {:.2e}; loss {first:.3} -> {last:.4} in {secs:.1}s; round trip identical {identical}",
            gc.max_rel_error
        ),
    )
}

fn c12_reproducibility() -> Outcome {
    let fixed = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cases = common::reproducibility_cases(fixed.path());
    let mut bad = Vec::new();
    for case in &cases {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        for out in [&a, &b] {
            let args: Vec<&str> = case.args.iter().map(String::as_str).collect();
            let o = common::run(&args, out);
            if common::code(&o) != 0 {
                bad.push(format!("{} exit {}", case.name, common::code(&o)));
            }
        }
        let diff = common::differing(&a, &b);
        if !diff.is_empty() {
            bad.push(format!("{}: {}", case.name, diff.join(" ")));
        }
    }
    check(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{} subcommands byte-identical across two runs", cases.len())
        } else {
            bad.join("; ")
        },
    )
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn acceptance() {
    let criteria: [Criterion; 12] = [
        ("cone mixing oracle", c1_cone_mixing),
        ("pairwise dot law", c2_pairwise_dot),
        ("RMSNorm Jacobian and stability", c3_rmsnorm_jacobian),
        ("uniform-head law", c4_uniform_heads),
        ("position-0 attention-output asymmetry", c5_position_asymmetry),
        ("circuit verification and control", c6_circuit),
        ("head-ablation redundancy", c7_ablation),
        ("sink-rate oracle", c8_sink_rate),
        ("corpus statistics", c9_corpus),
        ("stage classifier", c10_stages),
        ("training sanity", c11_training),
        ("CLI reproducibility", c12_reproducibility),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match r {
            Ok(d) => println!("PASS {:>2} {name}: {d}", i + 1),
            Err(d) => {
                println!("FAIL {:>2} {name}: {d}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
