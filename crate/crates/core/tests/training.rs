use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wpmixer::data::{sine_trend, Dataset, SplitSpec};
use wpmixer::gradcheck::toy_config;
use wpmixer::training::{self, evaluate, evaluate_with_threads, lr_at, smooth_l1, Loss, TrainConfig};
use wpmixer::{Checkpoint, Error, Forecaster, LinearMap, Persistence, Tensor, WPMixer};

fn dataset() -> Dataset {
    let split = SplitSpec::Rows { train: 140, val: 60, test: 60 };
    Dataset::from_table("sine".into(), sine_trend(260, 2), &split, 32, 8, true).unwrap()
}

fn model(seed: u64) -> WPMixer {
    WPMixer::new(toy_config(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn cfg(epochs: usize, batch: usize, lr: f64) -> TrainConfig {
    TrainConfig { epochs, batch_size: batch, lr, loss: Loss::SmoothL1, grad_clip: None }
}

fn bytes(m: &WPMixer) -> Vec<u8> {
    Checkpoint { model: m.clone(), scaling: None }.to_bytes()
}

#[test]
fn same_seed_same_run() {
    let ds = dataset();
    let run = || training::train(model(3), &ds.train, Some(&ds.val), &cfg(3, 16, 1e-3), 5, |_| {}).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(bytes(&a.model), bytes(&b.model));
    for (x, y) in a.report.epochs.iter().zip(&b.report.epochs) {
        assert_eq!((x.epoch, x.lr, x.steps, x.train_loss, x.val), (y.epoch, y.lr, y.steps, y.train_loss, y.val));
    }
    let other = training::train(model(3), &ds.train, Some(&ds.val), &cfg(3, 16, 1e-3), 6, |_| {}).unwrap();
    assert_ne!(bytes(&a.model), bytes(&other.model));
}

#[test]
fn epoch_visits_every_window_once() {
    let ds = dataset();
    let n = ds.train.len();
    for batch in [7, 16, n] {
        let out = training::train(model(0), &ds.train, None, &cfg(2, batch, 1e-3), 0, |_| {}).unwrap();
        assert!(out.report.epochs.iter().all(|e| e.steps == n.div_ceil(batch)));
    }
}

#[test]
fn smooth_l1_is_continuous_and_nonnegative() {
    let s = |e: f64| smooth_l1(&Tensor::scalar(e), &Tensor::scalar(0.0), 1.0).unwrap();
    for side in [-1.0, 1.0] {
        let b = side * 1.0;
        assert!((s(b - 1e-7) - s(b + 1e-7)).abs() < 3e-7);
        let slope = |e: f64| (s(e + 1e-9) - s(e - 1e-9)) / 2e-9;
        assert!((slope(b - 1e-6) - slope(b + 1e-6)).abs() < 1e-4);
    }
    for i in -300..=300 {
        let e = i as f64 / 100.0;
        let expect = if e.abs() < 1.0 { 0.5 * e * e } else { e.abs() - 0.5 };
        assert!((s(e) - expect).abs() < 1e-12 && s(e) >= 0.0);
    }
    let x = Tensor::from_fn(&[2, 3], |i| i as f64 - 2.5);
    assert_eq!(smooth_l1(&x, &x, 1.0).unwrap(), 0.0);
}

#[test]
fn learning_rate_schedule() {
    for epoch in 1..=100 {
        let expect = if epoch <= 3 { 0.01 } else { 0.01 * 0.9f64.powi(epoch as i32 - 3) };
        assert_eq!(lr_at(epoch, 0.01), expect);
    }
}

#[test]
fn enormous_step_reports_divergence() {
    let ds = dataset();
    let err = training::train(model(1), &ds.train, None, &cfg(5, 4, 1e250), 0, |_| {}).unwrap_err();
    assert!(matches!(err, Error::Divergence { .. } | Error::NonFiniteGradient(_)), "{err}");
    assert!(err.is_numerical());
}

#[test]
fn checkpoint_round_trip_keeps_predictions() {
    let ds = dataset();
    let out = training::train(model(2), &ds.train, Some(&ds.val), &cfg(2, 16, 1e-3), 2, |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    Checkpoint { model: out.model.clone(), scaling: Some(ds.stats.clone()) }.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    let (x, _) = ds.test.batch(&[0, 5, 9]);
    assert_eq!(out.model.predict(&x).unwrap(), back.model.predict(&x).unwrap());
    assert_eq!(back.scaling, Some(ds.stats));
}

#[test]
fn evaluation_ignores_thread_count() {
    let ds = dataset();
    let m = training::train(model(4), &ds.train, None, &cfg(1, 32, 1e-3), 4, |_| {}).unwrap().model;
    let one = evaluate_with_threads(&m, &ds.test, 5, 1).unwrap();
    for threads in [2, 3, 8] {
        assert_eq!(one, evaluate_with_threads(&m, &ds.test, 5, threads).unwrap());
    }
}

#[test]
fn baselines_share_the_protocol() {
    let ds = dataset();
    let persistence = evaluate(&Persistence { pred_len: 8 }, &ds.test, 32).unwrap();
    let linear = LinearMap::fit(&ds.train).unwrap();
    let lm = evaluate(&linear, &ds.test, 32).unwrap();
    // Sine plus trend is linear-predictable from a window of past values.
    assert!(lm.mse < 1e-6 && lm.mse < persistence.mse, "{lm:?} {persistence:?}");
    let (x, _) = ds.test.batch(&[0]);
    assert_eq!(linear.forecast(&x).unwrap().shape(), [1, 2, 8]);
}
