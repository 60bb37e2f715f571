//! Built-in consistency checks: filter banks, wavelet round trips, the toy
//! gradient check and the RevIN round trip.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gradcheck;
use crate::normalization::RevIn;
use crate::tensor::Tensor;
use crate::wavelet::{self, Wavelet, WaveletFilterBank};

pub const ROUND_TRIP_TOL: f64 = 1e-8;
pub const GRAD_TOL: f64 = 1e-4;
pub const REVIN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}: {}", self.name, self.detail)
    }
}

/// Runs every check on the built-in filter tables.
pub fn run() -> Vec<Check> {
    let banks: Vec<_> = Wavelet::ALL.iter().map(|&w| (w, wavelet::filter_bank(w))).collect();
    let mut out = Vec::new();
    for (w, bank) in banks {
        match bank {
            Ok(b) => out.push(check_bank(w, &b)),
            Err(e) => out.push(Check { name: format!("wavelet {w}"), passed: false, detail: e.to_string() }),
        }
    }
    out.push(check_gradients());
    out.push(check_revin());
    out
}

/// Self-check plus random round trips at several lengths and depths.
pub fn check_bank(w: Wavelet, bank: &WaveletFilterBank) -> Check {
    let name = format!("wavelet {}", bank.name);
    if let Err(e) = bank.validate() {
        return Check { name, passed: false, detail: e.to_string() };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for len in [96, 336, 512] {
        let x = Tensor::from_fn(&[2, 3, len], |_| rng.gen_range(-1.0..1.0));
        for level in 1..=wavelet::max_level(len, bank.filter_len()).min(5) {
            let err = wavelet::decompose(&x, w, bank, level)
                .and_then(|c| wavelet::reconstruct(&c, bank, len))
                .map_or(f64::INFINITY, |y| y.max_abs_diff(&x));
            worst = worst.max(err);
        }
    }
    Check { name, passed: worst < ROUND_TRIP_TOL, detail: format!("max round-trip error {worst:.2e}") }
}

fn check_gradients() -> Check {
    let name = "gradient check (toy model)".to_string();
    match gradcheck::check_model(&gradcheck::toy_config(), 3, 11) {
        Ok(r) => Check {
            name,
            passed: r.max_rel_error < GRAD_TOL,
            detail: format!("{} entries, max relative error {:.2e} at {}", r.checked, r.max_rel_error, r.worst),
        },
        Err(e) => Check { name, passed: false, detail: e.to_string() },
    }
}

fn check_revin() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Tensor::from_fn(&[4, 3, 50], |_| rng.gen_range(-3.0..3.0));
    let mut r = RevIn::with_affine(vec![0.5, 2.0, -1.5], vec![0.1, -3.0, 0.0]);
    let err = r.normalize(&x).and_then(|y| r.denormalize(&y)).map_or(f64::INFINITY, |z| z.max_abs_diff(&x));
    Check { name: "RevIN round trip".into(), passed: err < REVIN_TOL, detail: format!("max error {err:.2e}") }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_table_fails_and_names_the_wavelet() {
        let mut bank = wavelet::filter_bank(Wavelet::Sym4).unwrap();
        bank.dec_lo.swap(1, 2);
        let c = check_bank(Wavelet::Sym4, &bank);
        assert!(!c.passed);
        assert!(c.detail.contains("sym4"), "{}", c.detail);
        assert!(c.detail.contains("orthonormality"), "{}", c.detail);
    }

    #[test]
    fn revin_check_passes() {
        assert!(check_revin().passed, "{}", check_revin());
    }
}
