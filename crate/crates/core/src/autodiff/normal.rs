//! Standard normal CDF for GELU.
//!
//! `0.5 * erfc(-x / sqrt 2)` costs an `exp` per element over most of the
//! range, which dominates wide mixer layers. Here the lower half `[-10, 0]`
//! is tabulated as 320 degree-9 Taylor expansions about cell centres, with
//! derivatives `Phi^(k) = (-1)^(k-1) He_(k-1) phi` from the Hermite
//! recurrence; `cdf(x) = 1 - cdf(-x)` above zero. Agreement with `libm` is
//! about 1e-16 absolute. Beyond |x| = 10 the tail is below 1e-23.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

const LIMIT: f64 = 10.0;
const CELLS_PER_UNIT: f64 = 32.0;
const CELLS: usize = 320;
const DEG: usize = 9;

/// Accurate in the lower tail, where `1 + erf` cancels.
pub(crate) fn cdf_direct(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub(crate) fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Taylor coefficients per cell in the local coordinate `t in [-1, 1]`.
fn table() -> &'static [[f64; DEG + 1]] {
    static TABLE: OnceLock<Vec<[f64; DEG + 1]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let half = 0.5 / CELLS_PER_UNIT;
        (0..CELLS)
            .map(|i| {
                let mid = -LIMIT + (2 * i + 1) as f64 * half;
                let mut he = [0.0; DEG];
                he[0] = 1.0;
                he[1] = mid;
                for n in 1..DEG - 1 {
                    he[n + 1] = mid * he[n] - n as f64 * he[n - 1];
                }
                let mut a = [0.0; DEG + 1];
                a[0] = cdf_direct(mid);
                let (p, mut scale) = (pdf(mid), 1.0);
                for k in 1..=DEG {
                    scale *= half / k as f64;
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    a[k] = sign * he[k - 1] * p * scale;
                }
                a
            })
            .collect()
    })
}

/// `P(Z <= x)` for standard normal `Z`. Branch-free apart from the final
/// select, since activation signs are unpredictable.
pub(crate) fn cdf(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    let table = table();
    // Below -10 this evaluates the edge cell, ~1e-23.
    let v = -x.abs().min(LIMIT);
    let u = (v + LIMIT) * CELLS_PER_UNIT;
    let i = (u as usize).min(CELLS - 1);
    let t = 2.0 * (u - i as f64) - 1.0;
    let a = &table[i];
    // Estrin's scheme keeps the dependency chain short.
    let t2 = t * t;
    let t4 = t2 * t2;
    let p01 = a[0] + a[1] * t;
    let p23 = a[2] + a[3] * t;
    let p45 = a[4] + a[5] * t;
    let p67 = a[6] + a[7] * t;
    let p89 = a[8] + a[9] * t;
    let low = (p01 + p23 * t2) + (p45 + p67 * t2) * t4 + p89 * (t4 * t4);
    if x > 0.0 {
        1.0 - low
    } else {
        low
    }
}
