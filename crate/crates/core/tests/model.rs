mod common;

use common::{fixture_weights, gradient_image, input, model, reference, tiny_config};
use sovc_core::model::*;
use sovc_core::Error;

fn close(a: &Mat, b: &reference::M, tol: f64) -> bool {
    a.rows == b.len() && (0..a.rows).all(|r| a.row(r).iter().zip(&b[r]).all(|(x, y)| (x - y).abs() <= tol))
}

fn example(m: &CaptionModel, phase: f64, caption: &str) -> TrainExample {
    TrainExample {
        id: "x".into(),
        input: input(&m.config, phase),
        target: m.vocab.encode(caption, m.config.max_caption_len),
    }
}

#[test]
fn single_patch_frame_gives_one_token() {
    let cfg = ModelConfig {
        frame_side: 8,
        patch_size: 8,
        num_frames: 1,
        ..ModelConfig::test_scale()
    };
    let m = model(cfg);
    let t = m.patch_embed(&[gradient_image(8, 8, 0.0)]).unwrap();
    assert_eq!(t.shape(), (1, 64));
}

#[test]
fn zero_frames_zero_bias_give_zero_tokens() {
    let mut m = model(ModelConfig::test_scale());
    m.params.get_mut("patch.b").data.fill(0.0);
    let t = m.patch_embed(&vec![ImageF::filled(16, 16, [0.0; 3]); 2]).unwrap();
    assert_eq!(t.shape(), (8, 64));
    assert!(t.data.iter().all(|v| *v == 0.0));
}

#[test]
fn identity_projection_returns_flattened_patches() {
    let cfg = ModelConfig {
        frame_side: 4,
        patch_size: 2,
        d_model: 12,
        heads: 2,
        num_frames: 1,
        ..ModelConfig::test_scale()
    };
    let mut m = model(cfg);
    *m.params.get_mut("patch.w") = Mat::from_fn(12, 12, |r, c| f64::from(u8::from(r == c)));
    m.params.get_mut("patch.b").data.fill(0.0);
    let img = gradient_image(4, 4, 0.2);
    let t = m.patch_embed(std::slice::from_ref(&img)).unwrap();
    assert_eq!(t.rows, 4);
    assert!(close(&t, &reference::patches(&img, 2), 0.0));
}

#[test]
fn patch_embed_rejects_wrong_frame_size() {
    let m = model(ModelConfig::test_scale());
    let err = m.patch_embed(&[gradient_image(8, 8, 0.0)]).unwrap_err();
    assert!(matches!(err, Error::Contract(_)));
}

#[test]
fn hard_prompt_of_exact_size_crop_is_patch_embedding() {
    let m = model(ModelConfig::test_scale());
    let crop = gradient_image(16, 16, 1.0);
    let hard = m.embed_subject_prompt(&crop).unwrap();
    let direct = m.patch_embed(std::slice::from_ref(&crop)).unwrap();
    assert_eq!(hard, direct);
}

#[test]
fn uniform_crop_gives_identical_hard_tokens() {
    let m = model(ModelConfig::test_scale());
    let hard = m.embed_subject_prompt(&ImageF::filled(13, 9, [0.2, 0.5, 0.9])).unwrap();
    assert_eq!(hard.rows, 4);
    for r in 1..4 {
        for (a, b) in hard.row(r).iter().zip(hard.row(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn hard_prompt_matches_resize_then_patch_oracle() {
    let mut m = model(ModelConfig::test_scale());
    fixture_weights(&mut m);
    for (h, w) in [(5, 7), (23, 11), (40, 40)] {
        let crop = gradient_image(h, w, 0.3);
        let got = m.embed_subject_prompt(&crop).unwrap();
        assert!(close(&got, &reference::hard_prompt(&m, &crop), 1e-9), "{h}x{w}");
    }
    // frozen from the reference computation
    let got = m.embed_subject_prompt(&gradient_image(5, 7, 0.3)).unwrap();
    let golden = [
        (0, 0, 0.426867925182),
        (1, 5, 0.408725051735),
        (3, 63, 0.425658244608),
    ];
    for (r, c, v) in golden {
        assert!((got.at(r, c) - v).abs() < 1e-6, "({r},{c}) = {}", got.at(r, c));
    }
}

#[test]
fn encoder_input_layout() {
    let cfg = ModelConfig {
        frame_side: 8,
        patch_size: 8,
        num_frames: 1,
        subject_grid: 2,
        num_soft_tokens: 5,
        ..ModelConfig::test_scale()
    };
    let m = model(cfg);
    let frames = m.patch_embed(&[gradient_image(8, 8, 0.0)]).unwrap();
    let hard = m.embed_subject_prompt(&gradient_image(6, 6, 0.0)).unwrap();
    let seq = m.build_encoder_input(&frames, &hard).unwrap();
    assert_eq!(seq.len(), 10);
    assert_eq!(seq.type_histogram(), (4, 1, 5));
    assert_eq!(seq.positions, (0..10).collect::<Vec<_>>());
    assert_eq!(seq.type_tags[0], TokenType::Hard);
    assert_eq!(seq.type_tags[4], TokenType::Frame);
    assert_eq!(seq.type_tags[9], TokenType::Soft);
}

#[test]
fn permuting_frames_permutes_only_frame_rows() {
    let m = model(ModelConfig::test_scale());
    let inp = input(&m.config, 0.4);
    let hard = m.embed_subject_prompt(&inp.crop).unwrap();
    let mut reversed = inp.frames.clone();
    reversed.reverse();
    let a = m.build_encoder_input(&m.patch_embed(&inp.frames).unwrap(), &hard).unwrap();
    let b = m.build_encoder_input(&m.patch_embed(&reversed).unwrap(), &hard).unwrap();
    let pe = positional_encoding(a.len(), m.config.d_model);
    let content = |s: &TokenSequence, r: usize| -> Vec<f64> {
        s.embeddings.row(r).iter().zip(pe.row(r)).map(|(x, p)| x - p).collect()
    };
    let ppf = m.config.patches_per_frame();
    let t = m.config.num_frames;
    for r in 0..a.len() {
        match a.type_tags[r] {
            TokenType::Frame => {
                let k = r - 4;
                let (frame, patch) = (k / ppf, k % ppf);
                let src = 4 + (t - 1 - frame) * ppf + patch;
                let (x, y) = (content(&a, r), content(&b, src));
                assert!(x.iter().zip(&y).all(|(u, v)| (u - v).abs() < 1e-12));
            }
            _ => assert_eq!(a.embeddings.row(r), b.embeddings.row(r)),
        }
    }
}

#[test]
fn zero_layer_encoder_is_identity() {
    let m = model(ModelConfig {
        encoder_layers: 0,
        ..ModelConfig::test_scale()
    });
    let inp = input(&m.config, 0.1);
    let seq = m
        .build_encoder_input(&m.patch_embed(&inp.frames).unwrap(), &m.embed_subject_prompt(&inp.crop).unwrap())
        .unwrap();
    assert_eq!(m.encode(&seq).unwrap(), seq.embeddings);
}

#[test]
fn duplicate_rows_encode_identically_without_positions() {
    let m = model(ModelConfig::test_scale());
    let row: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).cos()).collect();
    let other: Vec<f64> = (0..64).map(|i| (i as f64 * 0.11).sin()).collect();
    let mut data = row.clone();
    data.extend(&other);
    data.extend(&row);
    let seq = TokenSequence {
        embeddings: Mat::from_vec(3, 64, data),
        type_tags: vec![TokenType::Frame; 3],
        positions: vec![0; 3],
    };
    let out = m.encode(&seq).unwrap();
    assert_eq!(out.row(0), out.row(2));
    assert_ne!(out.row(0), out.row(1));
}

#[test]
fn encoder_matches_straight_line_reference() {
    let mut m = model(ModelConfig::test_scale());
    fixture_weights(&mut m);
    let inp = input(&m.config, 0.9);
    let seq = m
        .build_encoder_input(&m.patch_embed(&inp.frames).unwrap(), &m.embed_subject_prompt(&inp.crop).unwrap())
        .unwrap();
    let got = m.encode(&seq).unwrap();
    let want = reference::encode(&m, &reference::to_m(&seq.embeddings));
    assert!(close(&got, &want, 1e-9));
    // frozen from the reference computation
    let golden = [
        (0, 0, -0.214383449283),
        (17, 31, -0.155729889058),
        (40, 63, -0.434747704479),
    ];
    for (r, c, v) in golden {
        assert!((got.at(r, c) - v).abs() < 1e-6, "({r},{c}) = {}", got.at(r, c));
    }
}

#[test]
fn subject_encoder() {
    let mut m = model(ModelConfig::test_scale());
    m.params.get_mut("subject.b").data.fill(0.0);
    let zero = m.encode_subject(&ImageF::filled(6, 9, [0.0; 3])).unwrap();
    assert_eq!(zero.shape(), (1, 64));
    assert!(zero.data.iter().all(|v| *v == 0.0));
    let a = m.encode_subject(&gradient_image(6, 9, 0.0)).unwrap();
    let b = m.encode_subject(&gradient_image(6, 9, 2.0)).unwrap();
    assert!(a.max_abs_diff(&b) > 1e-3);

    fixture_weights(&mut m);
    let crop = gradient_image(11, 6, 0.7);
    let got = m.encode_subject(&crop).unwrap();
    let want = reference::subject_token(&m, &crop);
    assert!(got.data.iter().zip(&want).all(|(x, y)| (x - y).abs() < 1e-9));
    // frozen from the reference computation
    for (c, v) in [(0, -0.730456636794), (33, 0.264165386714), (63, -0.862132763591)] {
        assert!((got.data[c] - v).abs() < 1e-6, "[{c}] = {}", got.data[c]);
    }
}

#[test]
fn soft_prompts_change_frame_rows() {
    let with = model(ModelConfig::test_scale());
    let without = model(ModelConfig {
        num_soft_tokens: 0,
        ..ModelConfig::test_scale()
    });
    let inp = input(&with.config, 0.2);
    let enc = |m: &CaptionModel| {
        let seq = m
            .build_encoder_input(&m.patch_embed(&inp.frames).unwrap(), &m.embed_subject_prompt(&inp.crop).unwrap())
            .unwrap();
        m.encode(&seq).unwrap()
    };
    let (a, b) = (enc(&with), enc(&without));
    let frame_rows = 4..4 + with.config.num_frame_tokens();
    let diff = frame_rows
        .flat_map(|r| a.row(r).iter().zip(b.row(r)).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    assert!(diff > 0.0);
}

#[test]
fn bbox_change_moves_first_step_logits() {
    let m = model(ModelConfig::test_scale());
    let mut a = input(&m.config, 0.0);
    let mut b = a.clone();
    a.crop = gradient_image(6, 6, 0.0);
    b.crop = gradient_image(9, 5, 1.3);
    let la = m.decoder_logits(&m.memory(&a).unwrap(), &[BOS]);
    let lb = m.decoder_logits(&m.memory(&b).unwrap(), &[BOS]);
    assert!(la.max_abs_diff(&lb) > 1e-6);
}

#[test]
fn greedy_is_deterministic_and_beam_one_matches() {
    for seed in 0..4 {
        let m = CaptionModel::new(ModelConfig::test_scale(), common::vocab(), seed).unwrap();
        let inp = input(&m.config, seed as f64);
        let g1 = m.caption(&inp, DecodeMode::Greedy).unwrap();
        let g2 = m.caption(&inp, DecodeMode::Greedy).unwrap();
        let b1 = m.caption(&inp, DecodeMode::Beam(1)).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(g1, b1);
        let b3 = m.caption(&inp, DecodeMode::Beam(3)).unwrap();
        assert!(b3.ids.len() <= m.config.max_caption_len + 1);
    }
}

#[test]
fn generate_over_concatenated_memory() {
    let m = model(ModelConfig::test_scale());
    let inp = input(&m.config, 0.6);
    let mem = m.memory(&inp).unwrap();
    let l = mem.rows - 1;
    let vbar = Mat::from_vec(l, mem.cols, mem.data[..l * mem.cols].to_vec());
    let subj = m.encode_subject(&inp.crop).unwrap();
    assert_eq!(subj.row(0), mem.row(l));
    assert_eq!(m.generate(&vbar, &subj, DecodeMode::Greedy), m.caption(&inp, DecodeMode::Greedy).unwrap());
}

#[test]
fn eos_first_generation_is_flagged_empty() {
    let mut m = model(ModelConfig::test_scale());
    let b = m.params.get_mut("out.b");
    b.data.fill(0.0);
    b.data[EOS] = 1e3;
    let g = m.caption(&input(&m.config, 0.0), DecodeMode::Greedy).unwrap();
    assert!(g.empty);
    assert_eq!(g.ids, vec![EOS]);
    assert_eq!(g.caption, "");
}

#[test]
fn overfit_single_pair_reproduces_caption() {
    let m = model(ModelConfig::test_scale());
    let ex = example(&m, 0.3, "a red ball is moving left");
    let cfg = TrainConfig {
        learning_rate: 3e-3,
        batch_size: 1,
        ..TrainConfig::default()
    };
    let mut tr = Trainer::new(m, cfg).unwrap();
    for _ in 0..40 {
        tr.train_step(std::slice::from_ref(&ex)).unwrap();
    }
    let g = tr.model.caption(&ex.input, DecodeMode::Greedy).unwrap();
    assert_eq!(g.caption, "a red ball is moving left");
    let fresh = example(&tr.model, 2.0, "a blue box is moving right");
    assert!(batch_loss(&tr.model, std::slice::from_ref(&ex)).unwrap() <= batch_loss(&tr.model, &[fresh]).unwrap());
}

#[test]
fn fixed_batch_descends() {
    let m = model(ModelConfig::test_scale());
    let ex = example(&m, 0.0, "a blue box is moving right");
    let batch = vec![ex.clone(), ex];
    let mut tr = Trainer::new(m, TrainConfig::default()).unwrap();
    let first = tr.train_step(&batch).unwrap();
    let second = tr.train_step(&batch).unwrap();
    assert!(second <= first + 1e-6, "{second} > {first}");
}

#[test]
fn pad_only_target_is_degenerate() {
    let m = model(ModelConfig::test_scale());
    let mut ex = example(&m, 0.0, "a");
    ex.target = vec![PAD; 5];
    let mut tr = Trainer::new(m, TrainConfig::default()).unwrap();
    assert!(matches!(tr.train_step(&[ex]), Err(Error::DegenerateBatch(_))));
}

#[test]
fn padding_does_not_change_loss() {
    let m = model(ModelConfig::test_scale());
    let ex = example(&m, 0.0, "a red ball");
    let mut padded = ex.clone();
    padded.target.extend([PAD; 4]);
    let a = batch_loss(&m, std::slice::from_ref(&ex)).unwrap();
    let b = batch_loss(&m, &[padded]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn gradcheck_tiny_config() {
    let mut m = model(tiny_config());
    fixture_weights(&mut m);
    let ex = example(&m, 0.5, "a red ball is moving");
    let report = gradcheck(&m, &ex, 1e-5).unwrap();
    for p in &report.params {
        println!("{}: {} entries, max rel {:.3e}, max abs {:.3e}", p.name, p.entries, p.max_rel_error, p.max_abs_error);
    }
    assert_eq!(report.params.len(), 5);
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn unused_token_embedding_gets_zero_gradient() {
    let m = model(tiny_config());
    let ex = example(&m, 0.5, "a red ball");
    let (_, grads) = batch_gradients(&m, &[ex.clone()]).unwrap();
    let g = grads[m.params.id("tok_emb")].as_ref().unwrap();
    let used: Vec<usize> = ex.target[..ex.target.len() - 1].to_vec();
    let unused = m.vocab.id("spare");
    assert!(!used.contains(&unused));
    assert!(g.row(unused).iter().all(|v| *v == 0.0));
    assert!(g.row(used[1]).iter().any(|v| *v != 0.0));
}

#[test]
fn epsilon_sweep_is_v_shaped() {
    let mut m = model(tiny_config());
    fixture_weights(&mut m);
    let ex = example(&m, 0.5, "a red ball is moving");
    let names = ["soft_prompt", "patch.w", "subject.w"];
    let eps = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
    let errs: Vec<f64> = eps
        .iter()
        .map(|&e| gradcheck_params(&m, &ex, e, &names, 24).unwrap().relative_l2_error)
        .collect();
    for (e, r) in eps.iter().zip(&errs) {
        println!("eps {e:.0e}: relative error {r:.3e}");
    }
    let best = (0..errs.len()).min_by(|&a, &b| errs[a].total_cmp(&errs[b])).unwrap();
    assert!(best > 0 && best < errs.len() - 1, "minimum at an end: {errs:?}");
    assert!(errs[..best].windows(2).all(|w| w[0] >= w[1] * 0.5));
    assert!(errs[0] > 10.0 * errs[best] && errs[errs.len() - 1] > 10.0 * errs[best]);
}

#[test]
fn untrained_checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = model(ModelConfig::test_scale());
    m.round_to_f32();
    let p = dir.path().join("m.sovc");
    save_checkpoint(&m, &p).unwrap();
    let back = load_checkpoint(&p).unwrap();
    assert_eq!(back, m);
    let inp = input(&m.config, 0.0);
    assert_eq!(back.caption(&inp, DecodeMode::Greedy).unwrap(), m.caption(&inp, DecodeMode::Greedy).unwrap());
}

#[test]
fn parameter_count_formula() {
    let m = model(ModelConfig::test_scale());
    let d = 64;
    let v = m.vocab.len();
    let expected = (3 * 64 + 1) * d + 3 * d + 5 * d + 49 * d + 2 * (12 * d * d + 13 * d) + 2 * d + v * d
        + 2 * (16 * d * d + 19 * d)
        + 2 * d
        + (d + 1) * v;
    assert_eq!(m.params.scalar_count(), expected);
    assert_eq!(m.config.parameter_count(v), expected);
}
