//! Raw-waveform transforms of the Signal protocol.
//!
//! Every function is pure: the same input, parameters and seed give the same
//! output.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::audio::{db_to_amplitude, interp_linear, mean_square, resample, AudioSignal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WowParams {
    /// Modulation depth.
    pub a_m: f64,
    /// Modulation frequency in Hz.
    pub f_m: f64,
}

impl Default for WowParams {
    fn default() -> Self {
        Self { a_m: 3.0, f_m: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseParams {
    pub snr_db: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self { snr_db: 10.0 }
    }
}

/// Static single-knee compressor curve in the dB domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DrcCurve {
    pub threshold_db: f64,
    pub ratio: f64,
}

impl Default for DrcCurve {
    fn default() -> Self {
        Self {
            threshold_db: -20.0,
            ratio: 4.0,
        }
    }
}

/// Time warp `F(t) = t + a_m sin(2 pi f_m t) / (2 pi f_m)`, `t` in seconds.
pub fn wow_warp(t: f64, p: &WowParams) -> f64 {
    let w = 2.0 * PI * p.f_m;
    t + p.a_m * (w * t).sin() / w
}

/// Reads the input at warped time `F(t_n)`, clamped to the clip. The
/// instantaneous playback rate is `1 + a_m cos(2 pi f_m t)`; for `a_m > 1`
/// the warp runs backwards for part of each cycle.
pub fn wow_resample(s: &AudioSignal, p: &WowParams) -> Result<AudioSignal> {
    s.validate()?;
    if !(p.f_m > 0.0) || !p.f_m.is_finite() {
        return Err(Error::param("f_m", "must be positive"));
    }
    if !(p.a_m >= 0.0) || !p.a_m.is_finite() {
        return Err(Error::param("a_m", "must be non-negative"));
    }
    let fs = s.sample_rate as f64;
    let w = 2.0 * PI * p.f_m;
    // F(t) * fs, kept in sample units so that a_m = 0 lands exactly on n.
    let samples = (0..s.len())
        .map(|n| {
            let pos = n as f64 + p.a_m * fs * (w * n as f64 / fs).sin() / w;
            interp_linear(&s.samples, pos)
        })
        .collect();
    Ok(s.with_samples(samples))
}

/// Adds white Gaussian noise rescaled so that its RMS is exactly
/// `rms(s) * 10^(-snr_db / 20)`.
pub fn add_noise(s: &AudioSignal, p: &NoiseParams, rng: &mut RngStream) -> Result<AudioSignal> {
    s.validate()?;
    if !p.snr_db.is_finite() {
        return Err(Error::param("snr_db", "must be finite"));
    }
    let signal_rms = mean_square(&s.samples).sqrt();
    if signal_rms == 0.0 {
        return Err(Error::SilentInput);
    }
    let mut noise: Vec<f64> = (0..s.len()).map(|_| rng.sample(StandardNormal)).collect();
    let noise_rms = mean_square(&noise).sqrt();
    let target = signal_rms * db_to_amplitude(-p.snr_db);
    let k = if noise_rms > 0.0 {
        target / noise_rms
    } else {
        0.0
    };
    for (n, x) in noise.iter_mut().zip(&s.samples) {
        *n = x + *n * k;
    }
    Ok(s.with_samples(noise))
}

/// Nearest-rank percentile of `|x|`.
fn abs_percentile(xs: &[f64], pct: f64) -> f64 {
    let mut mags: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let rank = ((pct / 100.0) * mags.len() as f64).ceil().max(1.0) as usize;
    mags[rank.min(mags.len()) - 1]
}

/// Normalizes by the 90th percentile magnitude so that about 10% of samples
/// fall outside `[-1, 1]`, then saturates those to `sign(x)`.
pub fn clip(s: &AudioSignal) -> Result<AudioSignal> {
    s.validate()?;
    let first = s.samples[0];
    if s.samples.iter().all(|&x| x == first) {
        return Err(Error::ConstantSignal);
    }
    let q = abs_percentile(&s.samples, 90.0);
    if q == 0.0 {
        return Err(Error::ConstantSignal);
    }
    let samples = s
        .samples
        .iter()
        .map(|&x| {
            let v = x / q;
            if v.abs() > 1.0 {
                v.signum()
            } else {
                v
            }
        })
        .collect();
    Ok(s.with_samples(samples))
}

pub fn speed_up(s: &AudioSignal, percent: f64) -> Result<AudioSignal> {
    if !(percent > -100.0) {
        return Err(Error::param("percent", "must exceed -100"));
    }
    resample(s, 1.0 + percent / 100.0)
}

/// `sin(2 pi v)` applied five times per sample.
pub fn harmonic_distortion(s: &AudioSignal) -> AudioSignal {
    let samples = s
        .samples
        .iter()
        .map(|&x| (0..5).fold(x, |v, _| (2.0 * PI * v).sin()))
        .collect();
    s.with_samples(samples)
}

pub fn gain(s: &AudioSignal, db: f64) -> AudioSignal {
    let k = db_to_amplitude(db);
    s.with_samples(s.samples.iter().map(|x| x * k).collect())
}

/// Swaps the parts before and after `split`. When `split` is `None` it is
/// drawn uniformly from `0..=len`.
pub fn rand_time_shift(
    s: &AudioSignal,
    split: Option<usize>,
    rng: &mut RngStream,
) -> Result<AudioSignal> {
    let split = match split {
        Some(k) if k > s.len() => {
            return Err(Error::param(
                "split",
                format!("{k} exceeds length {}", s.len()),
            ))
        }
        Some(k) => k,
        None => rng.random_range(0..=s.len()),
    };
    let mut samples = s.samples.clone();
    samples.rotate_left(split);
    Ok(s.with_samples(samples))
}

/// Sums two clips, zero-padding the shorter. The result is divided by its
/// peak only when that peak exceeds 1.
pub fn sound_mix(s1: &AudioSignal, s2: &AudioSignal) -> Result<AudioSignal> {
    if s1.sample_rate != s2.sample_rate {
        return Err(Error::SampleRateMismatch(s1.sample_rate, s2.sample_rate));
    }
    let n = s1.len().max(s2.len());
    let at = |xs: &[f64], i: usize| xs.get(i).copied().unwrap_or(0.0);
    let mut samples: Vec<f64> = (0..n)
        .map(|i| at(&s1.samples, i) + at(&s2.samples, i))
        .collect();
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 1.0 {
        samples.iter_mut().for_each(|x| *x /= peak);
    }
    Ok(s1.with_samples(samples))
}

const DRC_EPS: f64 = 1e-10;

pub fn drc(s: &AudioSignal, curve: &DrcCurve) -> Result<AudioSignal> {
    if !(curve.ratio >= 1.0) || !curve.ratio.is_finite() {
        return Err(Error::param("ratio", "must be at least 1"));
    }
    if !curve.threshold_db.is_finite() {
        return Err(Error::param("threshold_db", "must be finite"));
    }
    if curve.ratio == 1.0 {
        return Ok(s.clone());
    }
    let samples = s
        .samples
        .iter()
        .map(|&x| {
            let level = 20.0 * (x.abs() + DRC_EPS).log10();
            if level < curve.threshold_db {
                x
            } else {
                let out = curve.threshold_db + (level - curve.threshold_db) / curve.ratio;
                x.signum() * db_to_amplitude(out)
            }
        })
        .collect();
    Ok(s.with_samples(samples))
}

// Frames are two hops (50 ms) long.
const OLA_HOP_SECS: f64 = 0.025;

/// Duration-preserving pitch shift: resample by `2^(semitones/12)`, then
/// stretch back to the original length with waveform-similarity
/// overlap-add (50 ms Hann frames, 25 ms synthesis hop).
pub fn pitch_shift(s: &AudioSignal, semitones: f64) -> Result<AudioSignal> {
    s.validate()?;
    if !semitones.is_finite() {
        return Err(Error::param("semitones", "must be finite"));
    }
    let ratio = 2f64.powf(semitones / 12.0);
    let shifted = resample(s, ratio)?;
    Ok(s.with_samples(time_stretch(&shifted.samples, s.len(), s.sample_rate)))
}

/// WSOLA: stretches `x` to exactly `out_len` samples without changing pitch.
pub(crate) fn time_stretch(x: &[f64], out_len: usize, sample_rate: u32) -> Vec<f64> {
    let fs = sample_rate as f64;
    let hop = ((OLA_HOP_SECS * fs).round() as usize).max(1);
    let win = 2 * hop;
    let tolerance = hop / 2;
    let window: Vec<f64> = (0..win)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / win as f64).cos())
        .collect();

    // Pad so every candidate frame lies inside the buffer.
    let pad = win + tolerance;
    let mut xp = vec![0.0; pad];
    xp.extend_from_slice(x);
    xp.resize(xp.len() + pad + win + hop, 0.0);
    let analysis_hop = hop as f64 * x.len() as f64 / out_len as f64;

    let frames = out_len.div_ceil(hop) + 2;
    let mut acc = vec![0.0; frames * hop + win];
    let mut wsum = vec![0.0; acc.len()];
    let mut prev_start: Option<usize> = None;
    let half = (win / 2) as i64;
    let max_start = (xp.len() - win) as i64;

    for k in 0..frames {
        let nominal =
            ((k as f64 * analysis_hop).round() as i64 - half + pad as i64).clamp(0, max_start);
        let start = match prev_start {
            None => nominal as usize,
            Some(prev) => {
                best_alignment(&xp, prev + hop, nominal, tolerance as i64, win, max_start)
            }
        };
        let out_at = k * hop;
        for i in 0..win {
            acc[out_at + i] += window[i] * xp[start + i];
            wsum[out_at + i] += window[i];
        }
        prev_start = Some(start);
    }

    // Accumulator index j holds output sample j - win/2.
    (0..out_len)
        .map(|n| {
            let j = n + win / 2;
            if wsum[j] > 1e-9 {
                acc[j] / wsum[j]
            } else {
                0.0
            }
        })
        .collect()
}

/// Start offset within `[nominal - tol, nominal + tol]` whose frame best
/// matches the natural continuation at `template`. Ties favour the smallest
/// displacement.
fn best_alignment(
    xp: &[f64],
    template: usize,
    nominal: i64,
    tol: i64,
    win: usize,
    max_start: i64,
) -> usize {
    let tpl = &xp[template..template + win];
    let score = |start: usize| -> f64 {
        let cand = &xp[start..start + win];
        let mut dot = 0.0;
        let mut energy = 0.0;
        for (a, b) in tpl.iter().zip(cand) {
            dot += a * b;
            energy += b * b;
        }
        if energy > 0.0 {
            dot / energy.sqrt()
        } else {
            0.0
        }
    };
    let mut best = nominal.clamp(0, max_start) as usize;
    let mut best_score = score(best);
    for d in 1..=tol {
        for cand in [nominal - d, nominal + d] {
            if cand < 0 || cand > max_start {
                continue;
            }
            let sc = score(cand as usize);
            if sc > best_score + 1e-12 * best_score.abs().max(1e-300) {
                best = cand as usize;
                best_score = sc;
            }
        }
    }
    best
}

/// Parameters of the eleven-output Signal protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalParams {
    pub wow: WowParams,
    pub noise: NoiseParams,
    pub speed_percent: f64,
    pub gain_db: f64,
    pub drc: DrcCurve,
    pub pitch_semitones: f64,
}

impl Default for SignalParams {
    fn default() -> Self {
        Self {
            wow: WowParams::default(),
            noise: NoiseParams::default(),
            speed_percent: 15.0,
            gain_db: 10.0,
            drc: DrcCurve::default(),
            pitch_semitones: 2.0,
        }
    }
}

impl SignalParams {
    /// Checks every parameter up front, before any audio is touched.
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, "must be finite"))
            }
        };
        if !(self.wow.f_m > 0.0 && self.wow.f_m.is_finite()) {
            return Err(Error::param("f_m", "must be positive"));
        }
        if !(self.wow.a_m >= 0.0 && self.wow.a_m.is_finite()) {
            return Err(Error::param("a_m", "must be non-negative"));
        }
        finite("snr_db", self.noise.snr_db)?;
        finite("gain_db", self.gain_db)?;
        finite("threshold_db", self.drc.threshold_db)?;
        finite("pitch_semitones", self.pitch_semitones)?;
        if !(self.speed_percent > -100.0 && self.speed_percent.is_finite()) {
            return Err(Error::param(
                "speed_percent",
                "must be finite and exceed -100",
            ));
        }
        if !(self.drc.ratio >= 1.0 && self.drc.ratio.is_finite()) {
            return Err(Error::param("ratio", "must be at least 1"));
        }
        Ok(())
    }
}

/// Output names of [`signal_protocol`], in order.
pub const SIGNAL_TRANSFORMS: [&str; 11] = [
    "wow_resampling",
    "noise",
    "clipping",
    "speed_up",
    "harmonic_distortion",
    "gain",
    "rand_time_shift",
    "sound_mix",
    "drc",
    "pitch_shift_a",
    "pitch_shift_b",
];

/// The eleven Signal-protocol variants of `s`, in [`SIGNAL_TRANSFORMS`]
/// order. `classmate` is the same-class partner for the mix.
pub fn signal_protocol(
    s: &AudioSignal,
    classmate: &AudioSignal,
    params: &SignalParams,
    rng: &mut RngStream,
) -> Result<Vec<AudioSignal>> {
    use Error as E;
    s.validate()?;
    let mut noise_rng = rng.fork();
    let mut shift_rng = rng.fork();
    Ok(vec![
        wow_resample(s, &params.wow).map_err(E::in_transform(SIGNAL_TRANSFORMS[0]))?,
        add_noise(s, &params.noise, &mut noise_rng)
            .map_err(E::in_transform(SIGNAL_TRANSFORMS[1]))?,
        clip(s).map_err(E::in_transform(SIGNAL_TRANSFORMS[2]))?,
        speed_up(s, params.speed_percent).map_err(E::in_transform(SIGNAL_TRANSFORMS[3]))?,
        harmonic_distortion(s),
        gain(s, params.gain_db),
        rand_time_shift(s, None, &mut shift_rng).map_err(E::in_transform(SIGNAL_TRANSFORMS[6]))?,
        sound_mix(s, classmate).map_err(E::in_transform(SIGNAL_TRANSFORMS[7]))?,
        drc(s, &params.drc).map_err(E::in_transform(SIGNAL_TRANSFORMS[8]))?,
        pitch_shift(s, params.pitch_semitones).map_err(E::in_transform(SIGNAL_TRANSFORMS[9]))?,
        pitch_shift(s, -params.pitch_semitones).map_err(E::in_transform(SIGNAL_TRANSFORMS[10]))?,
    ])
}
