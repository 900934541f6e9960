//! Deterministic audio data augmentation for animal-sound classification.
//!
//! The crate covers the whole offline pipeline:
//!
//! - [`audio`] and [`wav`]: mono buffers, WAV I/O, resampling.
//! - [`dgt`]: Gaussian-window STFT spectrograms, rendering, `.spg` files.
//! - [`signal`]: the eleven raw-waveform transforms of the Signal protocol.
//! - [`spectro`]: the six spectrogram transforms of the Spectro protocol.
//! - [`image_aug`]: random affine augmentation of rendered images.
//! - [`protocols`]: NoAUG / StandardIMG / StandardSGN / Signal / Spectro.
//! - [`dataset`]: manifests, stratified folds, leakage-safe export.
//! - [`fusion`]: score sanitization, sum-rule fusion, recognition rate.
//!
//! All randomness flows through [`rng::RngStream`]; identical seeds give
//! identical outputs whether or not the `parallel` feature is enabled.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod dataset;
pub mod dgt;
pub mod error;
pub mod exec;
pub mod fusion;
pub mod image_aug;
pub mod protocols;
pub mod rng;
pub mod signal;
pub mod spectro;
pub mod wav;

pub use audio::{resample, rms, AudioSignal};
pub use dgt::{dgt, load_spec, render, save_spec, DgtParams, Spectrogram};
pub use error::{Error, Result};
pub use rng::RngStream;
pub use wav::{read_wav, write_wav};
