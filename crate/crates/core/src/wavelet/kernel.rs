//! Row-wise stride-2 filter kernels under zero extension.
//!
//! Analysis: `y[o] = sum_j h[j] * x[2o + 1 - j]` for `o < (n + F - 1) / 2`.
//! Synthesis: `x[t] = sum_o a[o] * g_lo[t + F - 2 - 2o] + d[o] * g_hi[t + F - 2 - 2o]`.
//! Both are applied independently to every contiguous row of length `n`.

pub(crate) fn analysis(x: &[f64], n: usize, h: &[f64], out: &mut [f64], out_len: usize) {
    let f = h.len() as isize;
    for (row_in, row_out) in x.chunks_exact(n).zip(out.chunks_exact_mut(out_len)) {
        for (o, y) in row_out.iter_mut().enumerate() {
            let top = 2 * o as isize + 1;
            let lo = (top - (n as isize - 1)).max(0);
            let hi = top.min(f - 1);
            let mut acc = 0.0;
            let mut j = lo;
            while j <= hi {
                acc += h[j as usize] * row_in[(top - j) as usize];
                j += 1;
            }
            *y = acc;
        }
    }
}

/// Adjoint of [`analysis`]: accumulates into `gx`.
pub(crate) fn analysis_adjoint(gy: &[f64], out_len: usize, h: &[f64], gx: &mut [f64], n: usize) {
    let f = h.len() as isize;
    for (row_g, row_x) in gy.chunks_exact(out_len).zip(gx.chunks_exact_mut(n)) {
        for (o, &g) in row_g.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let top = 2 * o as isize + 1;
            let lo = (top - (n as isize - 1)).max(0);
            let hi = top.min(f - 1);
            let mut j = lo;
            while j <= hi {
                row_x[(top - j) as usize] += h[j as usize] * g;
                j += 1;
            }
        }
    }
}

pub(crate) fn synthesis(a: &[f64], d: &[f64], coeff_len: usize, g_lo: &[f64], g_hi: &[f64], out: &mut [f64], n: usize) {
    let f = g_lo.len() as isize;
    let rows = a.chunks_exact(coeff_len).zip(d.chunks_exact(coeff_len));
    for ((ra, rd), row_out) in rows.zip(out.chunks_exact_mut(n)) {
        row_out.iter_mut().for_each(|v| *v = 0.0);
        for o in 0..coeff_len {
            let base = 2 * o as isize + 2 - f;
            let (av, dv) = (ra[o], rd[o]);
            for k in 0..f {
                let t = base + k;
                if t >= 0 && (t as usize) < n {
                    row_out[t as usize] += av * g_lo[k as usize] + dv * g_hi[k as usize];
                }
            }
        }
    }
}

/// Adjoint of [`synthesis`]: accumulates into `ga` and `gd`.
pub(crate) fn synthesis_adjoint(
    gx: &[f64],
    n: usize,
    g_lo: &[f64],
    g_hi: &[f64],
    ga: &mut [f64],
    gd: &mut [f64],
    coeff_len: usize,
) {
    let f = g_lo.len() as isize;
    let rows = ga.chunks_exact_mut(coeff_len).zip(gd.chunks_exact_mut(coeff_len));
    for ((ra, rd), row_g) in rows.zip(gx.chunks_exact(n)) {
        for o in 0..coeff_len {
            let base = 2 * o as isize + 2 - f;
            let (mut sa, mut sd) = (0.0, 0.0);
            for k in 0..f {
                let t = base + k;
                if t >= 0 && (t as usize) < n {
                    let g = row_g[t as usize];
                    sa += g * g_lo[k as usize];
                    sd += g * g_hi[k as usize];
                }
            }
            ra[o] += sa;
            rd[o] += sd;
        }
    }
}
