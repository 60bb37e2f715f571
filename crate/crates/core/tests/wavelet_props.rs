use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wpmixer::wavelet::{self, Wavelet};
use wpmixer::Tensor;

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape, |_| rng.gen_range(-5.0..5.0))
}

fn case() -> impl Strategy<Value = (Wavelet, usize, usize, u64)> {
    (0usize..11, 2usize..300, 1usize..6, any::<u64>()).prop_filter_map("depth feasible", |(w, len, level, seed)| {
        let wv = Wavelet::ALL[w];
        let f = wavelet::filter_bank(wv).unwrap().filter_len();
        (level <= wavelet::max_level(len, f)).then_some((wv, len, level, seed))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn perfect_reconstruction((w, len, level, seed) in case()) {
        let bank = wavelet::filter_bank(w).unwrap();
        let x = random(&[2, 3, len], seed);
        let c = wavelet::decompose(&x, w, &bank, level).unwrap();
        let y = wavelet::reconstruct(&c, &bank, len).unwrap();
        prop_assert!(y.max_abs_diff(&x) < 1e-8);
    }

    #[test]
    fn coefficient_lengths_follow_the_oracle((w, len, level, seed) in case()) {
        let bank = wavelet::filter_bank(w).unwrap();
        let f = bank.filter_len();
        let c = wavelet::decompose(&random(&[1, len], seed), w, &bank, level).unwrap();
        let mut cur = len;
        let mut expect = Vec::new();
        for _ in 0..level {
            cur = (cur + f - 1) / 2;
            expect.push(cur);
        }
        expect.push(cur);
        expect.reverse();
        prop_assert_eq!(c.lengths(), expect);
    }

    #[test]
    fn decomposition_is_linear((w, len, level, seed) in case(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let bank = wavelet::filter_bank(w).unwrap();
        let (x, y) = (random(&[2, len], seed), random(&[2, len], seed ^ 7));
        let combo = Tensor::new(
            x.shape().to_vec(),
            x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect(),
        ).unwrap();
        let cx = wavelet::decompose(&x, w, &bank, level).unwrap();
        let cy = wavelet::decompose(&y, w, &bank, level).unwrap();
        let cc = wavelet::decompose(&combo, w, &bank, level).unwrap();
        let expect = cx.combine(a, &cy, b).unwrap();
        for (s, t) in cc.series().zip(expect.series()) {
            prop_assert!(s.max_abs_diff(t) < 1e-10);
        }
    }

    #[test]
    fn rows_are_transformed_independently((w, len, level, seed) in case()) {
        let bank = wavelet::filter_bank(w).unwrap();
        let mut x = random(&[3, len], seed);
        let before = wavelet::decompose(&x, w, &bank, level).unwrap();
        // Perturb row 1 only.
        for v in &mut x.data_mut()[len..2 * len] {
            *v += 1.0;
        }
        let after = wavelet::decompose(&x, w, &bank, level).unwrap();
        for (s, t) in before.series().zip(after.series()) {
            let n = s.last_dim();
            prop_assert_eq!(&s.data()[..n], &t.data()[..n]);
            prop_assert_eq!(&s.data()[2 * n..], &t.data()[2 * n..]);
        }
    }
}

/// The full acceptance grid is exercised in the acceptance target; this is a
/// fast spot check of the deepest, longest corner.
#[test]
fn deep_long_corner() {
    for w in Wavelet::ALL {
        let bank = wavelet::filter_bank(w).unwrap();
        let x = random(&[1, 1200], 3);
        let c = wavelet::decompose(&x, w, &bank, 5).unwrap();
        assert!(wavelet::reconstruct(&c, &bank, 1200).unwrap().max_abs_diff(&x) < 1e-8);
    }
}
