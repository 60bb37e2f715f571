//! Wavelet patch-mixer forecasting.
//!
//! A look-back window is split by a multi-level discrete wavelet transform
//! into one approximation and several detail series. Each series runs
//! through its own branch (instance normalization, patching, embedding, two
//! patch/embedding mixer modules and a linear head) and the predicted
//! coefficients are reassembled into the forecast by the inverse transform.
//!
//! Everything is differentiated by the small reverse-mode engine in
//! [`autodiff`], in 64-bit floats.

pub mod alloc;
pub mod autodiff;
pub mod baselines;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod flops;
pub mod gradcheck;
pub mod model;
pub mod normalization;
pub mod rng;
pub mod run;
pub mod selftest;
pub mod tensor;
pub mod training;
pub mod wavelet;

pub use autodiff::{Gradients, ParamId, ParamStore, Parameter, Tape, Var};
pub use baselines::{Forecaster, LinearMap, Persistence};
pub use checkpoint::Checkpoint;
pub use config::RunConfig;
pub use error::{Error, Result};
pub use model::{ModelConfig, WPMixer};
pub use tensor::Tensor;
pub use wavelet::{CoefficientSet, Wavelet, WaveletFilterBank};
