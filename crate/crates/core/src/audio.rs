//! Mono audio buffers and the numeric helpers shared by every transform.

use crate::error::{Error, Result};

/// Mono sample buffer. Amplitudes are nominally in `[-1, 1]` but transforms
/// such as gain are free to exceed that range.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    /// Builds a signal, rejecting a zero sample rate, empty buffers and
    /// non-finite amplitudes.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let s = Self {
            samples,
            sample_rate,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::InvalidSignal("sample rate must be positive".into()));
        }
        if self.samples.is_empty() {
            return Err(Error::InvalidSignal("no samples".into()));
        }
        if let Some(i) = self.samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidSignal(format!(
                "non-finite sample at index {i}"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub(crate) fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            sample_rate: self.sample_rate,
        }
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub fn rms(signal: &AudioSignal) -> Result<f64> {
    if signal.samples.is_empty() {
        return Err(Error::InvalidSignal("rms of empty signal".into()));
    }
    Ok(mean_square(&signal.samples).sqrt())
}

pub(crate) fn mean_square(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64
}

/// Linear interpolation of `xs` at fractional index `pos`, clamped to the
/// valid index range.
pub fn interp_linear(xs: &[f64], pos: f64) -> f64 {
    let last = xs.len() - 1;
    if pos <= 0.0 {
        return xs[0];
    }
    if pos >= last as f64 {
        return xs[last];
    }
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if frac == 0.0 {
        xs[i]
    } else {
        xs[i] + (xs[i + 1] - xs[i]) * frac
    }
}

/// Playback-rate change by `factor`: output length `round(len / factor)`,
/// output sample `n` read at input position `n * factor`. The sample rate is
/// kept, so a factor above 1 raises pitch and shortens the clip.
pub fn resample(signal: &AudioSignal, factor: f64) -> Result<AudioSignal> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::param(
            "factor",
            format!("must be positive, got {factor}"),
        ));
    }
    if signal.samples.is_empty() {
        return Err(Error::InvalidSignal("resample of empty signal".into()));
    }
    if factor == 1.0 {
        return Ok(signal.clone());
    }
    let out_len = ((signal.len() as f64 / factor).round() as usize).max(1);
    let samples = (0..out_len)
        .map(|n| interp_linear(&signal.samples, n as f64 * factor))
        .collect();
    Ok(signal.with_samples(samples))
}

pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}
