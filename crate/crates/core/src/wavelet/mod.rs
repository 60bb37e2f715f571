//! Filter banks and multi-level discrete wavelet transforms.
//!
//! Transforms run along the last axis of a tensor; every leading index is an
//! independent series. Boundaries are handled by zero extension, which makes
//! the analysis operator exactly invertible once each level's input length
//! is recorded.

pub(crate) mod kernel;
mod tables;
mod transform;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use transform::{
    auxiliary_lengths, coeff_len, decompose, decompose_on_tape, dwt_step, idwt_step, max_level, reconstruct,
    reconstruct_on_tape, CoefficientSet, CoefficientVars,
};

/// Boundary extension used by the analysis filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaddingMode {
    #[default]
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Wavelet {
    Db2,
    Db3,
    Db5,
    Sym2,
    Sym3,
    Sym4,
    Sym5,
    Coif4,
    Coif5,
    Bior3_1,
    Bior3_5,
}

impl Wavelet {
    pub const ALL: [Wavelet; 11] = [
        Wavelet::Db2,
        Wavelet::Db3,
        Wavelet::Db5,
        Wavelet::Sym2,
        Wavelet::Sym3,
        Wavelet::Sym4,
        Wavelet::Sym5,
        Wavelet::Coif4,
        Wavelet::Coif5,
        Wavelet::Bior3_1,
        Wavelet::Bior3_5,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Wavelet::Db2 => "db2",
            Wavelet::Db3 => "db3",
            Wavelet::Db5 => "db5",
            Wavelet::Sym2 => "sym2",
            Wavelet::Sym3 => "sym3",
            Wavelet::Sym4 => "sym4",
            Wavelet::Sym5 => "sym5",
            Wavelet::Coif4 => "coif4",
            Wavelet::Coif5 => "coif5",
            Wavelet::Bior3_1 => "bior3.1",
            Wavelet::Bior3_5 => "bior3.5",
        }
    }

    pub fn is_orthogonal(self) -> bool {
        !matches!(self, Wavelet::Bior3_1 | Wavelet::Bior3_5)
    }

    /// Number of polynomial degrees annihilated by the analysis high-pass.
    pub fn vanishing_moments(self) -> usize {
        match self {
            Wavelet::Db2 | Wavelet::Sym2 => 2,
            Wavelet::Db3 | Wavelet::Sym3 | Wavelet::Bior3_1 | Wavelet::Bior3_5 => 3,
            Wavelet::Sym4 => 4,
            Wavelet::Db5 | Wavelet::Sym5 => 5,
            Wavelet::Coif4 => 8,
            Wavelet::Coif5 => 10,
        }
    }

    fn low_pass(self) -> (&'static [f64], &'static [f64]) {
        use tables::*;
        match self {
            Wavelet::Db2 => (&DB2_SCALING, &DB2_SCALING),
            Wavelet::Db3 => (&DB3_SCALING, &DB3_SCALING),
            Wavelet::Db5 => (&DB5_SCALING, &DB5_SCALING),
            Wavelet::Sym2 => (&SYM2_SCALING, &SYM2_SCALING),
            Wavelet::Sym3 => (&SYM3_SCALING, &SYM3_SCALING),
            Wavelet::Sym4 => (&SYM4_SCALING, &SYM4_SCALING),
            Wavelet::Sym5 => (&SYM5_SCALING, &SYM5_SCALING),
            Wavelet::Coif4 => (&COIF4_SCALING, &COIF4_SCALING),
            Wavelet::Coif5 => (&COIF5_SCALING, &COIF5_SCALING),
            Wavelet::Bior3_1 => (&BIOR3_1_DEC_LO, &BIOR3_1_REC_LO),
            Wavelet::Bior3_5 => (&BIOR3_5_DEC_LO, &BIOR3_5_REC_LO),
        }
    }
}

impl fmt::Display for Wavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Wavelet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Wavelet::ALL.into_iter().find(|w| w.as_str() == s).ok_or_else(|| Error::UnknownWavelet {
            name: s.to_string(),
            supported: Wavelet::ALL.iter().map(|w| w.as_str()).collect(),
        })
    }
}

impl TryFrom<String> for Wavelet {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Wavelet> for String {
    fn from(w: Wavelet) -> String {
        w.as_str().to_string()
    }
}

/// The four FIR filters of a two-channel perfect-reconstruction bank.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletFilterBank {
    pub name: String,
    pub orthogonal: bool,
    pub dec_lo: Vec<f64>,
    pub dec_hi: Vec<f64>,
    pub rec_lo: Vec<f64>,
    pub rec_hi: Vec<f64>,
}

const SELF_CHECK_TOL: f64 = 1e-12;

impl WaveletFilterBank {
    /// Builds a bank from its two low-pass filters. The high-pass filters
    /// follow from the alternating-sign (quadrature mirror) relations
    /// `dec_hi[k] = (-1)^(k+1) rec_lo[k]` and `rec_hi[k] = (-1)^k dec_lo[k]`.
    pub fn from_low_pass(name: impl Into<String>, dec_lo: Vec<f64>, rec_lo: Vec<f64>, orthogonal: bool) -> Self {
        let alt = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
        let dec_hi = rec_lo.iter().enumerate().map(|(k, v)| -alt(k) * v).collect();
        let rec_hi = dec_lo.iter().enumerate().map(|(k, v)| alt(k) * v).collect();
        Self { name: name.into(), orthogonal, dec_lo, dec_hi, rec_lo, rec_hi }
    }

    pub fn filter_len(&self) -> usize {
        self.dec_lo.len()
    }

    /// Checks the scaling-filter identities and a short round trip.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::FilterBank { wavelet: self.name.clone(), reason });
        let f = self.dec_lo.len();
        if f < 2 || !f.is_multiple_of(2) || [&self.dec_hi, &self.rec_lo, &self.rec_hi].iter().any(|h| h.len() != f) {
            return fail(format!("inconsistent filter lengths (dec_lo has {f} taps)"));
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        for (label, h) in [("dec_lo", &self.dec_lo), ("rec_lo", &self.rec_lo)] {
            let sum: f64 = h.iter().sum();
            if (sum - sqrt2).abs() > SELF_CHECK_TOL {
                return fail(format!("{label} sums to {sum:.15}, expected sqrt(2)"));
            }
        }
        if self.orthogonal {
            for shift in (0..f).step_by(2) {
                let dot: f64 = (0..f - shift).map(|k| self.dec_lo[k] * self.dec_lo[k + shift]).sum();
                let expected = if shift == 0 { 1.0 } else { 0.0 };
                if (dot - expected).abs() > SELF_CHECK_TOL {
                    return fail(format!(
                        "orthonormality violated at even shift {shift}: {dot:.15} (expected {expected})"
                    ));
                }
            }
        }
        let probe: Vec<f64> = (0..(2 * f + 7)).map(|i| ((i * 7919 % 113) as f64 / 56.0) - 1.0).collect();
        let n = probe.len();
        let m = coeff_len(n, f);
        let (mut a, mut d) = (vec![0.0; m], vec![0.0; m]);
        kernel::analysis(&probe, n, &self.dec_lo, &mut a, m);
        kernel::analysis(&probe, n, &self.dec_hi, &mut d, m);
        let mut back = vec![0.0; n];
        kernel::synthesis(&a, &d, m, &self.rec_lo, &self.rec_hi, &mut back, n);
        let err = back.iter().zip(&probe).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if err > 1e-10 {
            return fail(format!("round-trip error {err:.3e} exceeds 1e-10"));
        }
        Ok(())
    }
}

/// Standard coefficients for `wavelet`, self-checked on construction.
pub fn filter_bank(wavelet: Wavelet) -> Result<WaveletFilterBank> {
    let (dec, rec) = wavelet.low_pass();
    let dec_lo = if wavelet.is_orthogonal() { dec.iter().rev().copied().collect() } else { dec.to_vec() };
    let bank = WaveletFilterBank::from_low_pass(wavelet.as_str(), dec_lo, rec.to_vec(), wavelet.is_orthogonal());
    bank.validate()?;
    Ok(bank)
}

/// Looks a bank up by its conventional name (`"db2"`, `"bior3.5"`, ...).
pub fn filter_bank_by_name(name: &str) -> Result<WaveletFilterBank> {
    filter_bank(name.parse()?)
}
