use rand::SeedableRng;

use super::*;
use crate::wavelet::Wavelet;

fn toy() -> ModelConfig {
    ModelConfig {
        channels: 2,
        seq_len: 32,
        pred_len: 8,
        wavelet: Wavelet::Db2,
        level: 1,
        patch_len: 8,
        stride: 4,
        d_model: 8,
        tfactor: 2,
        dfactor: 2,
        mixer_dropout: 0.0,
        embed_dropout: 0.0,
        bn_axis: BnAxis::Embedding,
        activation: Activation::Gelu,
        ablation: Ablation::default(),
    }
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(7)
}

fn batch(b: usize, c: usize, l: usize, phase: f64) -> Tensor {
    Tensor::from_fn(&[b, c, l], |i| {
        let t = (i % l) as f64;
        let row = (i / l) as f64;
        (0.3 * t + phase + row).sin() + 0.05 * t * (1.0 + row)
    })
}

/// One training-mode pass to populate running statistics.
fn warm(model: &mut WPMixer, x: &Tensor) {
    let mut tape = Tape::new();
    let xv = tape.input(x.clone());
    let mut r = rng();
    let fp = model.forward(&mut tape, xv, &mut Mode::Train { rng: &mut r }).unwrap();
    model.commit_bn(&fp.bn_stats);
}

fn set_zero(model: &mut WPMixer, prefix: &str) {
    zero_where(model, |name| name.starts_with(prefix));
}

fn zero_where(model: &mut WPMixer, pick: impl Fn(&str) -> bool) {
    let ids: Vec<_> =
        model.params().iter().filter(|(_, p)| pick(&p.name)).map(|(id, p)| (id, p.value.shape().to_vec())).collect();
    assert!(!ids.is_empty(), "no parameters selected");
    for (id, shape) in ids {
        model.params_mut().set_value(id, Tensor::zeros(&shape)).unwrap();
    }
}

#[test]
fn output_shape_is_batch_channels_horizon() {
    let mut m = WPMixer::new(toy(), &mut rng()).unwrap();
    let x = batch(3, 2, 32, 0.0);
    warm(&mut m, &x);
    assert_eq!(m.predict(&x).unwrap().shape(), [3, 2, 8]);
}

#[test]
fn param_count_matches_closed_form() {
    let mut cfgs = vec![toy()];
    let mut c = toy();
    c.bn_axis = BnAxis::Patch;
    c.level = 2;
    cfgs.push(c);
    let mut c = toy();
    c.ablation.second_mixer = false;
    c.ablation.inner_affine = false;
    cfgs.push(c);
    let mut c = toy();
    c.ablation = Ablation::case(false, false, false, true, false);
    cfgs.push(c);
    for cfg in cfgs {
        let m = WPMixer::new(cfg.clone(), &mut rng()).unwrap();
        assert_eq!(m.params().scalar_count(), cfg.param_count().unwrap(), "{cfg:?}");
    }
}

#[test]
fn disabling_second_mixer_removes_one_module() {
    let full = toy();
    let mut one = toy();
    one.ablation.second_mixer = false;
    let b = full.branches().unwrap();
    let module: usize = b
        .iter()
        .map(|b| {
            let (n, d, w) = (b.n_patches, b.d_model, b.d_model);
            (2 * w + 2 * n * n * 2 + n * 2 + n) + (2 * w + 2 * d * d * 2 + d * 2 + d)
        })
        .sum();
    let count = |cfg: ModelConfig| WPMixer::new(cfg, &mut rng()).unwrap().params().scalar_count();
    assert_eq!(count(full) - count(one), module);
}

#[test]
fn eval_before_training_is_uninitialized_stats() {
    let m = WPMixer::new(toy(), &mut rng()).unwrap();
    let err = m.predict(&batch(2, 2, 32, 0.0)).unwrap_err();
    match err {
        Error::Branch { source, .. } => assert!(matches!(*source, Error::UninitializedStats(_))),
        other => panic!("{other:?}"),
    }
}

#[test]
fn eval_is_bitwise_deterministic() {
    let mut m = WPMixer::new(toy(), &mut rng()).unwrap();
    let x = batch(4, 2, 32, 0.4);
    warm(&mut m, &x);
    let a = m.predict(&x).unwrap();
    let b = m.predict(&x).unwrap();
    assert_eq!(a.data(), b.data());
}

#[test]
fn zero_heads_without_inner_revin_predict_lookback_mean() {
    let mut cfg = toy();
    cfg.ablation.inner_revin = false;
    let mut m = WPMixer::new(cfg, &mut rng()).unwrap();
    let x = batch(2, 2, 32, 1.0);
    warm(&mut m, &x);
    set_zero(&mut m, "b0.head");
    set_zero(&mut m, "b1.head");
    let y = m.predict(&x).unwrap();
    for (row_in, row_out) in x.data().chunks(32).zip(y.data().chunks(8)) {
        let mean = row_in.iter().sum::<f64>() / 32.0;
        for v in row_out {
            assert!((v - mean).abs() < 1e-12);
        }
    }
}

#[test]
fn identical_variates_are_treated_identically() {
    let mut m = WPMixer::new(toy(), &mut rng()).unwrap();
    let one = batch(3, 1, 32, 0.2);
    let mut data = Vec::new();
    for row in one.data().chunks(32) {
        data.extend_from_slice(row);
        data.extend_from_slice(row);
    }
    let x = Tensor::new(vec![3, 2, 32], data).unwrap();
    warm(&mut m, &x);
    let y = m.predict(&x).unwrap();
    for pair in y.data().chunks(16) {
        assert_eq!(pair[..8], pair[8..]);
    }
}

#[test]
fn zeroing_a_branch_only_changes_its_stream() {
    let mut cfg = toy();
    cfg.level = 2;
    cfg.seq_len = 48;
    let mut m = WPMixer::new(cfg, &mut rng()).unwrap();
    let x = batch(3, 2, 48, 0.0);
    warm(&mut m, &x);
    let streams = |m: &WPMixer| {
        let mut tape = Tape::new();
        let xv = tape.input(x.clone());
        let fp = m.forward(&mut tape, xv, &mut Mode::Eval).unwrap();
        fp.branch_outputs.iter().map(|&v| tape.value(v).clone()).collect::<Vec<_>>()
    };
    let before = streams(&m);
    for j in 0..3 {
        // The inner RevIN weight is divided by on the way out, so it stays.
        let mut z = m.clone();
        let prefix = format!("b{j}.");
        zero_where(&mut z, |n| n.starts_with(&prefix) && !n.ends_with("revin.weight"));
        let after = streams(&z);
        for (k, (a, b)) in before.iter().zip(&after).enumerate() {
            if k == j {
                assert!(a.max_abs_diff(b) > 1e-6, "branch {j} unaffected");
            } else {
                assert_eq!(a.data(), b.data(), "branch {k} changed when zeroing {j}");
            }
        }
    }
}

#[test]
fn linear_skeleton_is_affine_in_its_input() {
    let mut cfg = toy();
    cfg.activation = Activation::Identity;
    cfg.ablation.outer_revin = false;
    cfg.ablation.inner_revin = false;
    let mut m = WPMixer::new(cfg, &mut rng()).unwrap();
    let x1 = batch(2, 2, 32, 0.0);
    let x2 = batch(2, 2, 32, 2.5).scale(-1.7);
    warm(&mut m, &x1);
    let alpha = 0.3;
    let mix = x1.scale(alpha).add(&x2.scale(1.0 - alpha)).unwrap();
    let lhs = m.predict(&mix).unwrap();
    let rhs = m.predict(&x1).unwrap().scale(alpha).add(&m.predict(&x2).unwrap().scale(1.0 - alpha)).unwrap();
    assert!(lhs.max_abs_diff(&rhs) < 1e-8);
}

#[test]
fn zero_patch_mixer_weights_give_zero_output() {
    let mut m = WPMixer::new(toy(), &mut rng()).unwrap();
    set_zero(&mut m, "b0.mix1.patch.fc");
    let mut tape = Tape::new();
    let x = tape.input(batch(2, 2, 4 * 8, 0.0).reshape(&[2, 2, 4, 8]).unwrap());
    let mut mode = Mode::Eval;
    m.running.get_mut("b0.mix1.patch.bn").unwrap().initialized = true;
    let mut stats = Vec::new();
    let mut cx = Ctx { model: &m, tape: &mut tape, mode: &mut mode, bn_stats: &mut stats };
    let y = {
        let pre = "b0.mix1.patch";
        let z = cx.batch_norm(x, &format!("{pre}.bn")).unwrap();
        let z = cx.tape.permute(z, &[0, 3, 1, 2]).unwrap();
        let z = cx.linear(z, &format!("{pre}.fc1")).unwrap();
        let z = cx.activation(z);
        cx.linear(z, &format!("{pre}.fc2")).unwrap()
    };
    assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
}

#[test]
fn zero_embedding_mlp_is_identity_after_norm() {
    let mut cfg = toy();
    cfg.ablation.patch_mixer = false;
    cfg.ablation.second_mixer = false;
    let mut m = WPMixer::new(cfg, &mut rng()).unwrap();
    set_zero(&mut m, "b0.mix1.embed.fc2");
    let xt = batch(2, 2, 16, 0.0).reshape(&[2, 2, 2, 8]).unwrap();
    let br = BranchConfig { n_patches: 2, ..m.branches[0] };
    let mut tape = Tape::new();
    let x = tape.input(xt);
    let mut r = rng();
    let mut mode = Mode::Train { rng: &mut r };
    let mut stats = Vec::new();
    let mut cx = Ctx { model: &m, tape: &mut tape, mode: &mut mode, bn_stats: &mut stats };
    let y = cx.mixer(x, 0, 1, &br).unwrap();
    let (g, b) = cx.affine("b0.mix1.embed.bn");
    let z = cx.tape.batch_norm_train(x, g, b, 3, BN_EPS).unwrap().0;
    assert_eq!(tape.value(y).data(), tape.value(z).data());
}

#[test]
fn running_stats_follow_momentum_rule() {
    let mut r = RunningStats::new(1);
    r.update(&BatchNormStats { mean: vec![2.0], var: vec![3.0], count: 4 });
    assert!((r.mean[0] - 0.2).abs() < 1e-15);
    assert!((r.var[0] - (0.9 + 0.1 * 4.0)).abs() < 1e-15);
    assert!(r.initialized);
}

#[test]
fn wrong_input_shape_is_dimension_error() {
    let m = WPMixer::new(toy(), &mut rng()).unwrap();
    assert!(matches!(m.predict(&Tensor::zeros(&[1, 3, 32])), Err(Error::Dimension { .. })));
}

#[test]
fn train_mode_dropout_consumes_rng_and_changes_output() {
    let mut cfg = toy();
    cfg.mixer_dropout = 0.3;
    cfg.embed_dropout = 0.2;
    let m = WPMixer::new(cfg, &mut rng()).unwrap();
    let x = batch(2, 2, 32, 0.0);
    let run = |seed: u64| {
        let mut tape = Tape::new();
        let xv = tape.input(x.clone());
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let fp = m.forward(&mut tape, xv, &mut Mode::Train { rng: &mut r }).unwrap();
        tape.value(fp.output).clone()
    };
    assert_eq!(run(1).data(), run(1).data());
    assert!(run(1).max_abs_diff(&run(2)) > 0.0);
}
