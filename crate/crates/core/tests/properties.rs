use proptest::prelude::*;

use sinklab::conemodel::{
    conditional_expected_sq_norm, sample_cone_vector, AttentionWeightModel, ConeParams,
};
use sinklab::corpus::{build_repeat_variants, ngram_repeat_proportion, TokenStream};
use sinklab::metrics::{classify_stage, pgm_p5, Stage};
use sinklab::model::{forward, rope_apply, rope_apply_inverse, CaptureLevel, ModelConfig};
use sinklab::numerics::{
    dot, l2_norm, rms, rms_norm, rms_norm_jvp, softmax_causal, DenseMatrix, Matrix, RngState,
};
use sinklab::train::init_weights;

fn vec_f64(d: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, d).prop_filter("nonzero", |v| l2_norm(v) > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rms_norm_has_unit_rms_and_ignores_scale(x in vec_f64(1..64), c in 0.01..100.0f64) {
        let y = rms_norm(&x, None, 0.0).unwrap();
        prop_assert!((rms(&y, 0.0) - 1.0).abs() < 1e-12);
        let cx: Vec<f64> = x.iter().map(|v| c * v).collect();
        let z = rms_norm(&cx, None, 0.0).unwrap();
        for (a, b) in y.iter().zip(&z) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn jvp_is_orthogonal_to_x_and_kills_parallel_moves(x in vec_f64(2..32), seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let dx = rng.normal_vec(x.len());
        let j = rms_norm_jvp(&x, &dx).unwrap();
        prop_assert!(dot(&j, &x).abs() < 1e-9 * (1.0 + l2_norm(&dx) * l2_norm(&x)));
        let par = rms_norm_jvp(&x, &x).unwrap();
        prop_assert!(l2_norm(&par) < 1e-12);
    }

    #[test]
    fn causal_softmax_rows_are_distributions(l in 1usize..24, seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let s = Matrix::from_fn(l, l, |_, _| 5.0 * rng.normal());
        let p = softmax_causal(&s);
        for i in 0..l {
            let row = p.row(i);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row[i + 1..].iter().all(|&v| v == 0.0));
            prop_assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn cone_vectors_sit_on_the_cone(alpha in 0.0..=1.0f64, d in 2usize..64, seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let params = ConeParams::random_axis(alpha, d, &mut rng).unwrap();
        let v = sample_cone_vector(&params, &mut rng);
        prop_assert!((l2_norm(&v) - 1.0).abs() < 1e-9);
        prop_assert!((dot(&v, params.axis()) - alpha).abs() < 1e-9);
    }

    #[test]
    fn mixing_value_is_bounded_and_falls_with_length(alpha in 0.0..0.999f64, l in 1usize..200) {
        let p = vec![1.0 / l as f64; l];
        let q = vec![1.0 / (l + 1) as f64; l + 1];
        let a = conditional_expected_sq_norm(alpha, &p).unwrap();
        let b = conditional_expected_sq_norm(alpha, &q).unwrap();
        prop_assert!(a <= 1.0 + 1e-12 && a >= alpha * alpha - 1e-12);
        prop_assert!(b < a);
        if l == 1 {
            prop_assert_eq!(a, 1.0);
        }
    }

    #[test]
    fn sparse_weights_are_distributions(len in 1usize..64, k in 1usize..6, seed in any::<u64>()) {
        let m = AttentionWeightModel::SparseRandom { len, k };
        let p = m.realize(&mut RngState::new(seed));
        prop_assert_eq!(p.len(), len);
        prop_assert!(p.iter().all(|&v| v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn repeat_share_is_a_nonincreasing_fraction(
        docs in prop::collection::vec(prop::collection::vec(0u32..3, 0..30), 1..4),
    ) {
        let s = TokenStream::from_documents(docs.iter().map(|d| (d, false)));
        let mut prev = f64::INFINITY;
        for n in 2..8 {
            match ngram_repeat_proportion(&s, n) {
                Ok(p) => {
                    prop_assert!((0.0..=1.0).contains(&p));
                    prop_assert!(p <= prev);
                    prev = p;
                }
                Err(_) => prop_assert!(docs.iter().all(|d| d.len() < n)),
            }
        }
    }

    #[test]
    fn repeat_variants_score_the_same_count(
        doc in prop::collection::vec(1u32..256, 1..40),
        n in 1usize..9,
    ) {
        let (s1, m1) = build_repeat_variants(&doc, n, true, 0).unwrap();
        let (s2, m2) = build_repeat_variants(&doc, n, false, 0).unwrap();
        prop_assert_eq!(s1.len(), doc.len() + n);
        prop_assert_eq!(s2.len(), doc.len() + n - 1);
        let c1 = m1.iter().filter(|&&m| m).count();
        let c2 = m2.iter().filter(|&&m| m).count();
        prop_assert_eq!(c1, doc.len() - 1);
        prop_assert_eq!(c1, c2);
        prop_assert_eq!(&s1[n..], &doc[..]);
    }

    #[test]
    fn ndjson_round_trips(docs in prop::collection::vec((prop::collection::vec(0u32..1000, 0..20), any::<bool>()), 0..6)) {
        let s = TokenStream::from_documents(docs.iter().map(|(d, b)| (d, *b)));
        let mut buf = Vec::new();
        s.write_ndjson(&mut buf).unwrap();
        prop_assert_eq!(TokenStream::read_ndjson(&buf[..]).unwrap(), s);
    }

    #[test]
    fn rope_inverse_undoes_rotation(v in prop::collection::vec(-3.0..3.0f64, 1..9), pos in 0usize..512) {
        let v: Vec<f64> = v.iter().flat_map(|&x| [x, -x * 0.5]).collect();
        let r = rope_apply(&v, pos, 10_000.0).unwrap();
        prop_assert!((l2_norm(&r) - l2_norm(&v)).abs() < 1e-9);
        let back = rope_apply_inverse(&r, pos, 10_000.0).unwrap();
        for (a, b) in back.iter().zip(&v) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn pgm_is_header_plus_one_byte_per_cell(rows in 1usize..9, cols in 1usize..9, seed in any::<u64>()) {
        let mut rng = RngState::new(seed);
        let m = DenseMatrix::from_fn(rows, cols, |_, _| 1.4 * rng.uniform() - 0.2);
        let img = pgm_p5(&m);
        let header = format!("P5\n{cols} {rows}\n255\n");
        prop_assert!(img.starts_with(header.as_bytes()));
        prop_assert_eq!(img.len(), header.len() + rows * cols);
        for (k, &b) in img[header.len()..].iter().enumerate() {
            let v = m.as_slice()[k];
            prop_assert_eq!(b, (255.0 * v).round().clamp(0.0, 255.0) as u8);
        }
    }

    #[test]
    fn final_stage_needs_early_emergence_at_zero(e in prop::option::of(0usize..20), c in prop::option::of(0usize..8)) {
        let s = classify_stage(e, c);
        prop_assert_eq!(s == Stage::Final, matches!(e, Some(l) if l <= 2) && c == Some(0));
        prop_assert_eq!(s == Stage::PreEmergent, e.is_none());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forward_attention_is_causal(tokens in prop::collection::vec(0u32..32, 1..16), seed in any::<u64>()) {
        let c = ModelConfig::tiny();
        let w = init_weights::<f64>(&c, seed).unwrap();
        let t = forward(&w, &tokens, CaptureLevel::Full).unwrap();
        for heads in &t.attn {
            for a in heads {
                for i in 0..tokens.len() {
                    prop_assert!((a.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    prop_assert!(a.row(i)[i + 1..].iter().all(|&v| v == 0.0));
                }
            }
        }
        // outputs at a position never depend on later tokens
        let prefix = &tokens[..tokens.len().div_ceil(2)];
        let tp = forward(&w, prefix, CaptureLevel::Logits).unwrap();
        for i in 0..prefix.len() {
            for (a, b) in tp.logits.row(i).iter().zip(t.logits.row(i)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
