//! Discrete Gabor transform: a short-time Fourier transform with a Gaussian
//! analysis window, plus rendering and the `.spg` container.
//!
//! Column `m` is centred on sample `m*hop + (hop-1)/2`, so the frame whose
//! centre is nearest to sample `k` is `floor(k / hop)`. The window is
//! `exp(-pi * dt^2 / sigma2)` with `dt` in seconds and the transform is
//! scaled by `1 / sigma2` and by the sample period (the discrete sum stands
//! in for the integral). Samples outside the signal count as zero.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use image::GrayImage;
use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio::AudioSignal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgtParams {
    /// Gaussian width in seconds squared. `None` picks the width whose
    /// -60 dB support spans exactly `channels` samples at the input's rate.
    pub window_sigma2: Option<f64>,
    pub hop: usize,
    pub channels: usize,
    pub dynamic_range_db: f64,
}

impl Default for DgtParams {
    fn default() -> Self {
        Self {
            window_sigma2: None,
            hop: 128,
            channels: 512,
            dynamic_range_db: 80.0,
        }
    }
}

impl DgtParams {
    pub fn validate(&self) -> Result<()> {
        if self.channels < 2 {
            return Err(Error::param("channels", "must be at least 2"));
        }
        if self.hop == 0 || self.hop > self.channels {
            return Err(Error::param(
                "hop",
                format!("must be in 1..={} (window support)", self.channels),
            ));
        }
        if let Some(s2) = self.window_sigma2 {
            if !(s2 > 0.0) || !s2.is_finite() {
                return Err(Error::param("window_sigma2", "must be positive"));
            }
        }
        if !(self.dynamic_range_db > 0.0) || !self.dynamic_range_db.is_finite() {
            return Err(Error::param("dynamic_range_db", "must be positive"));
        }
        Ok(())
    }

    pub fn sigma2_for(&self, sample_rate: u32) -> f64 {
        self.window_sigma2.unwrap_or_else(|| {
            // exp(-pi t^2 / s2) = 1e-3  at  t = channels / (2 fs)
            let half = self.channels as f64 / (2.0 * sample_rate as f64);
            PI * half * half / (3.0 * 10f64.ln())
        })
    }
}

/// Magnitude time-frequency matrix. Row 0 is 0 Hz; columns are time frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Array2<f64>,
    pub freq_resolution: f64,
    pub time_resolution: f64,
    pub source_sample_rate: u32,
}

impl Spectrogram {
    pub fn rows(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn cols(&self) -> usize {
        self.magnitudes.ncols()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.magnitudes.dim()
    }

    /// Top of the frequency axis, i.e. the frequency of the last row.
    pub fn max_frequency(&self) -> f64 {
        (self.rows().saturating_sub(1)) as f64 * self.freq_resolution
    }

    pub fn with_magnitudes(&self, magnitudes: Array2<f64>) -> Self {
        Self {
            magnitudes,
            freq_resolution: self.freq_resolution,
            time_resolution: self.time_resolution,
            source_sample_rate: self.source_sample_rate,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.magnitudes.iter().all(|v| v.is_finite() && *v >= 0.0)
    }

    /// Crops or zero-pads trailing columns to `cols`.
    pub fn fit_width(&self, cols: usize) -> Self {
        let rows = self.rows();
        let keep = cols.min(self.cols());
        let mut out = Array2::zeros((rows, cols));
        out.slice_mut(ndarray::s![.., ..keep])
            .assign(&self.magnitudes.slice(ndarray::s![.., ..keep]));
        self.with_magnitudes(out)
    }
}

pub fn dgt(signal: &AudioSignal, params: &DgtParams) -> Result<Spectrogram> {
    params.validate()?;
    signal.validate()?;
    let n = signal.len();
    if n < params.hop {
        return Err(Error::InvalidSignal(format!(
            "signal of {n} samples is shorter than one hop ({})",
            params.hop
        )));
    }
    let fs = signal.sample_rate as f64;
    let sigma2 = params.sigma2_for(signal.sample_rate);
    let len = params.channels;
    let hop = params.hop;
    let frames = n.div_ceil(hop);
    let rows = len / 2 + 1;

    // Offset of the frame start relative to m*hop; identical for every frame.
    let centre_offset = (hop as f64 - 1.0) / 2.0;
    let start_offset = (centre_offset - len as f64 / 2.0).ceil();
    let window: Vec<f64> = (0..len)
        .map(|j| {
            let dt = (start_offset + j as f64 - centre_offset) / fs;
            (-PI * dt * dt / sigma2).exp()
        })
        .collect();
    let scale = 1.0 / (sigma2 * fs);

    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let mut scratch = vec![Complex::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::default(); len];
    let mut magnitudes = Array2::<f64>::zeros((rows, frames));
    for m in 0..frames {
        let start = (m * hop) as i64 + start_offset as i64;
        for (j, slot) in buf.iter_mut().enumerate() {
            let idx = start + j as i64;
            let x = if idx >= 0 && (idx as usize) < n {
                signal.samples[idx as usize]
            } else {
                0.0
            };
            *slot = Complex::new(x * window[j], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (r, v) in buf.iter().take(rows).enumerate() {
            magnitudes[[r, m]] = v.norm() * scale;
        }
    }

    Ok(Spectrogram {
        magnitudes,
        freq_resolution: fs / len as f64,
        time_resolution: hop as f64 / fs,
        source_sample_rate: signal.sample_rate,
    })
}

const RENDER_EPS: f64 = 1e-10;

/// Log-magnitude grayscale image; image row `i` is spectrogram row `i`.
///
/// The peak maps to 255 and anything `dynamic_range_db` or more below it to 0.
/// An all-zero spectrogram renders black.
pub fn render(spec: &Spectrogram, params: &DgtParams) -> GrayImage {
    let (rows, cols) = spec.dims();
    let peak_mag = spec.magnitudes.iter().cloned().fold(0.0, f64::max);
    if peak_mag <= 0.0 {
        return GrayImage::new(cols as u32, rows as u32);
    }
    let peak = 20.0 * (peak_mag + RENDER_EPS).log10();
    let dr = params.dynamic_range_db;
    let floor = peak - dr;
    GrayImage::from_fn(cols as u32, rows as u32, |x, y| {
        let v = 20.0 * (spec.magnitudes[[y as usize, x as usize]] + RENDER_EPS).log10();
        let level = ((v - floor) / dr).clamp(0.0, 1.0);
        image::Luma([(255.0 * level).round() as u8])
    })
}

pub fn save_png(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

pub fn load_png(path: impl AsRef<Path>) -> Result<GrayImage> {
    Ok(image::open(path)?.into_luma8())
}

const SPG_MAGIC: &[u8; 4] = b"SPG1";
const SPG_HEADER: usize = 4 + 4 + 4 + 8 + 8 + 4;

/// Encodes a spectrogram as `.spg`: magic `SPG1`, rows and cols (u32),
/// frequency and time resolution (f64), source sample rate (u32), then the
/// row-major float32 payload. Everything is little-endian.
pub fn encode_spec(spec: &Spectrogram) -> Vec<u8> {
    let (rows, cols) = spec.dims();
    let mut out = Vec::with_capacity(SPG_HEADER + rows * cols * 4);
    out.extend_from_slice(SPG_MAGIC);
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    out.extend_from_slice(&spec.freq_resolution.to_le_bytes());
    out.extend_from_slice(&spec.time_resolution.to_le_bytes());
    out.extend_from_slice(&spec.source_sample_rate.to_le_bytes());
    for v in spec.magnitudes.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_spec(bytes: &[u8]) -> Result<Spectrogram> {
    if bytes.len() < 4 || &bytes[..4] != SPG_MAGIC {
        return Err(Error::BadFormat("missing SPG1 magic".into()));
    }
    if bytes.len() < SPG_HEADER {
        return Err(Error::Truncated {
            expected: SPG_HEADER,
            found: bytes.len(),
        });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let rows = u32_at(4) as usize;
    let cols = u32_at(8) as usize;
    let freq_resolution = f64_at(12);
    let time_resolution = f64_at(20);
    let source_sample_rate = u32_at(28);
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(4))
        .and_then(|p| p.checked_add(SPG_HEADER))
        .ok_or_else(|| Error::BadFormat("dimensions overflow".into()))?;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::BadFormat(format!(
            "{} trailing bytes after payload",
            bytes.len() - expected
        )));
    }
    let data: Vec<f64> = bytes[SPG_HEADER..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let magnitudes =
        Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::BadFormat(e.to_string()))?;
    Ok(Spectrogram {
        magnitudes,
        freq_resolution,
        time_resolution,
        source_sample_rate,
    })
}

pub fn save_spec(spec: &Spectrogram, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_spec(spec)).map_err(|e| Error::io(path, e))
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<Spectrogram> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_spec(&bytes)
}
