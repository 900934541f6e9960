//! Spectrogram-domain transforms of the Spectro protocol.
//!
//! Each transform keeps the input's dimensions and axis metadata. The
//! random ones come in two forms: `foo(spec, params, rng)` draws its random
//! choices, `foo_with(spec, params, draw)` applies explicit ones.

use ndarray::Array2;
use rand::Rng;

use crate::dgt::Spectrogram;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

fn check_non_empty(spec: &Spectrogram) -> Result<()> {
    if spec.rows() == 0 || spec.cols() == 0 {
        return Err(Error::TooSmall("empty spectrogram".into()));
    }
    Ok(())
}

fn same_dims(a: &Spectrogram, b: &Spectrogram) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    Ok(())
}

/// Linear interpolation between columns `floor(pos)` and `floor(pos)+1`.
fn sample_column(m: &Array2<f64>, row: usize, pos: f64) -> f64 {
    let last = m.ncols() - 1;
    if pos <= 0.0 {
        return m[[row, 0]];
    }
    if pos >= last as f64 {
        return m[[row, last]];
    }
    let i = pos.floor() as usize;
    let t = pos - i as f64;
    if t == 0.0 {
        m[[row, i]]
    } else {
        m[[row, i]] * (1.0 - t) + m[[row, i + 1]] * t
    }
}

fn sample_row(m: &Array2<f64>, pos: f64, col: usize) -> f64 {
    let last = m.nrows() - 1;
    if pos <= 0.0 {
        return m[[0, col]];
    }
    if pos >= last as f64 {
        return m[[last, col]];
    }
    let i = pos.floor() as usize;
    let t = pos - i as f64;
    if t == 0.0 {
        m[[i, col]]
    } else {
        m[[i, col]] * (1.0 - t) + m[[i + 1, col]] * t
    }
}

// ---------------------------------------------------------------------------
// Random shifts

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftParams {
    /// Largest pitch shift as a fraction of the row count.
    pub max_row_fraction: f64,
    /// Largest time shift as a fraction of the column count.
    pub max_col_fraction: f64,
}

impl Default for ShiftParams {
    fn default() -> Self {
        Self {
            max_row_fraction: 0.05,
            max_col_fraction: 0.10,
        }
    }
}

/// Circular shift: entry `(i, j)` moves to `(i + rows, j + cols)` modulo the
/// dimensions.
pub fn shift(spec: &Spectrogram, rows: i64, cols: i64) -> Spectrogram {
    let (h, w) = spec.dims();
    let dr = rows.rem_euclid(h as i64) as usize;
    let dc = cols.rem_euclid(w as i64) as usize;
    let m = &spec.magnitudes;
    let out = Array2::from_shape_fn((h, w), |(i, j)| m[[(i + h - dr) % h, (j + w - dc) % w]]);
    spec.with_magnitudes(out)
}

pub fn random_shifts(
    spec: &Spectrogram,
    p: &ShiftParams,
    rng: &mut RngStream,
) -> Result<Spectrogram> {
    check_non_empty(spec)?;
    let max_r = (p.max_row_fraction * spec.rows() as f64).floor() as i64;
    let max_c = (p.max_col_fraction * spec.cols() as f64).floor() as i64;
    let r = rng.random_range(-max_r..=max_r);
    let c = rng.random_range(-max_c..=max_c);
    Ok(shift(spec, r, c))
}

// ---------------------------------------------------------------------------
// Same-class sum

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumMode {
    /// Elementwise mean; keeps magnitudes in the inputs' range.
    #[default]
    Mean,
    Sum,
}

pub fn same_class_sum(a: &Spectrogram, b: &Spectrogram, mode: SumMode) -> Result<Spectrogram> {
    same_dims(a, b)?;
    let sum = &a.magnitudes + &b.magnitudes;
    Ok(a.with_magnitudes(match mode {
        SumMode::Mean => sum * 0.5,
        SumMode::Sum => sum,
    }))
}

// ---------------------------------------------------------------------------
// VTLN

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VtlnParams {
    pub alpha_range: (f64, f64),
    /// Knee frequency in Hz; `None` means `0.8 * f_max`.
    pub f0: Option<f64>,
    /// Top frequency in Hz; `None` uses the spectrogram's last row.
    pub f_max: Option<f64>,
    pub slices: usize,
    /// Upper bound on the fraction of columns dropped by the random crop.
    pub crop_fraction: f64,
}

impl Default for VtlnParams {
    fn default() -> Self {
        Self {
            alpha_range: (0.9, 1.1),
            f0: None,
            f_max: None,
            slices: 10,
            crop_fraction: 0.05,
        }
    }
}

/// Piecewise-linear frequency warp: slope `alpha` below `f0`, then the line
/// through `(f0, alpha f0)` and `(f_max, f_max)`.
pub fn vtln_warp(f: f64, alpha: f64, f0: f64, f_max: f64) -> f64 {
    if f < f0 {
        alpha * f
    } else {
        (f_max - alpha * f0) / (f_max - f0) * (f - f0) + alpha * f0
    }
}

/// Inverse of [`vtln_warp`] on `[0, f_max]`.
pub fn vtln_unwarp(g: f64, alpha: f64, f0: f64, f_max: f64) -> f64 {
    if g < alpha * f0 {
        g / alpha
    } else {
        f0 + (g - alpha * f0) * (f_max - f0) / (f_max - alpha * f0)
    }
}

/// Random choices of one VTLN application.
#[derive(Debug, Clone, PartialEq)]
pub struct VtlnDraw {
    /// Columns dropped before stretching back to the original width.
    pub crop: usize,
    pub crop_left: bool,
    /// One warp factor per temporal slice.
    pub alphas: Vec<f64>,
}

impl VtlnParams {
    fn knee_and_top(&self, spec: &Spectrogram) -> Result<(f64, f64)> {
        let f_max = self.f_max.unwrap_or_else(|| spec.max_frequency());
        let f0 = self.f0.unwrap_or(0.8 * f_max);
        let (a, b) = self.alpha_range;
        if !(a > 0.0 && a <= b && b.is_finite()) {
            return Err(Error::param(
                "alpha_range",
                format!("need 0 < a <= b, got [{a}, {b}]"),
            ));
        }
        if !(f0 > 0.0 && f0 < f_max) {
            return Err(Error::param(
                "f0",
                format!("need 0 < f0 < f_max, got f0={f0}, f_max={f_max}"),
            ));
        }
        if b * f0 >= f_max {
            return Err(Error::param(
                "alpha_range",
                "alpha * f0 must stay below f_max",
            ));
        }
        if self.slices == 0 {
            return Err(Error::param("slices", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.crop_fraction) {
            return Err(Error::param("crop_fraction", "must be in [0, 1)"));
        }
        Ok((f0, f_max))
    }

    pub fn draw(&self, spec: &Spectrogram, rng: &mut RngStream) -> VtlnDraw {
        let max_crop = (self.crop_fraction * spec.cols() as f64).floor() as usize;
        let crop = rng.random_range(0..=max_crop);
        let crop_left = rng.random_bool(0.5);
        let (a, b) = self.alpha_range;
        let alphas = (0..self.slices)
            .map(|_| if a == b { a } else { rng.random_range(a..=b) })
            .collect();
        VtlnDraw {
            crop,
            crop_left,
            alphas,
        }
    }
}

pub fn vtln(spec: &Spectrogram, p: &VtlnParams, rng: &mut RngStream) -> Result<Spectrogram> {
    let draw = p.draw(spec, rng);
    vtln_with(spec, p, &draw)
}

pub fn vtln_with(spec: &Spectrogram, p: &VtlnParams, draw: &VtlnDraw) -> Result<Spectrogram> {
    check_non_empty(spec)?;
    let (f0, f_max) = p.knee_and_top(spec)?;
    let (h, w) = spec.dims();
    if w < p.slices {
        return Err(Error::TooSmall(format!(
            "{w} columns cannot form {} slices",
            p.slices
        )));
    }
    if draw.alphas.len() != p.slices {
        return Err(Error::param("alphas", "one warp factor per slice required"));
    }
    if draw.crop >= w {
        return Err(Error::param("crop", "cannot drop every column"));
    }

    // Crop then stretch back to full width.
    let cropped = if draw.crop == 0 {
        spec.magnitudes.clone()
    } else {
        let first = if draw.crop_left { draw.crop } else { 0 };
        let kept = w - draw.crop;
        let src = spec
            .magnitudes
            .slice(ndarray::s![.., first..first + kept])
            .to_owned();
        let scale = if w > 1 {
            (kept - 1) as f64 / (w - 1) as f64
        } else {
            0.0
        };
        Array2::from_shape_fn((h, w), |(i, j)| sample_column(&src, i, j as f64 * scale))
    };

    let df = spec.freq_resolution;
    let mut out = Array2::zeros((h, w));
    for (s, &alpha) in draw.alphas.iter().enumerate() {
        let lo = s * w / p.slices;
        let hi = (s + 1) * w / p.slices;
        let sources: Vec<f64> = (0..h)
            .map(|i| vtln_unwarp(i as f64 * df, alpha, f0, f_max) / df)
            .collect();
        for j in lo..hi {
            for (i, &pos) in sources.iter().enumerate() {
                out[[i, j]] = sample_row(&cropped, pos, j);
            }
        }
    }
    Ok(spec.with_magnitudes(out))
}

// ---------------------------------------------------------------------------
// EMDA

/// Peaking equalizer `psi = (f0, gain, Q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equalizer {
    pub f0: f64,
    pub gain_db: f64,
    pub q: f64,
}

impl Equalizer {
    pub const FLAT: Equalizer = Equalizer {
        f0: 1000.0,
        gain_db: 0.0,
        q: 1.0,
    };

    /// Linear gain at `f`: `10^(g w(f) / 20)` with the Lorentzian bell
    /// `w(f) = 1 / (1 + ((f - f0) Q / f0)^2)`.
    pub fn gain_at(&self, f: f64) -> f64 {
        let x = (f - self.f0) * self.q / self.f0;
        let bell = 1.0 / (1.0 + x * x);
        10f64.powf(self.gain_db * bell / 20.0)
    }

    fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0) || !(self.q > 0.0) || !self.gain_db.is_finite() {
            return Err(Error::param("equalizer", format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmdaParams {
    pub alpha: f64,
    pub beta: f64,
    /// Time delay in frames.
    pub delay: f64,
    pub psi1: Equalizer,
    pub psi2: Equalizer,
}

/// Sampling ranges for [`EmdaParams::draw`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmdaRanges {
    pub max_delay: f64,
    pub f0: (f64, f64),
    pub gain_db: (f64, f64),
    pub q: (f64, f64),
}

impl Default for EmdaRanges {
    fn default() -> Self {
        Self {
            max_delay: 50.0,
            f0: (100.0, 6000.0),
            gain_db: (-8.0, 8.0),
            q: (1.0, 9.0),
        }
    }
}

fn uniform(rng: &mut RngStream, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

impl EmdaParams {
    pub fn draw(ranges: &EmdaRanges, rng: &mut RngStream) -> Self {
        let eq = |rng: &mut RngStream| Equalizer {
            f0: uniform(rng, ranges.f0),
            gain_db: uniform(rng, ranges.gain_db),
            q: uniform(rng, ranges.q),
        };
        let psi1 = eq(rng);
        let psi2 = eq(rng);
        Self {
            alpha: rng.random_range(0.0..=1.0),
            beta: rng.random_range(0.0..=1.0),
            delay: uniform(rng, (0.0, ranges.max_delay)),
            psi1,
            psi2,
        }
    }
}

/// `alpha * Phi(s1, psi1) + (1 - alpha) * Phi(s2 delayed by beta*T, psi2)`.
pub fn emda(s1: &Spectrogram, s2: &Spectrogram, p: &EmdaParams) -> Result<Spectrogram> {
    same_dims(s1, s2)?;
    check_non_empty(s1)?;
    if !(0.0..=1.0).contains(&p.alpha) || !(0.0..=1.0).contains(&p.beta) {
        return Err(Error::param("alpha/beta", "must lie in [0, 1]"));
    }
    if !(p.delay >= 0.0) || !p.delay.is_finite() {
        return Err(Error::param("delay", "must be non-negative"));
    }
    p.psi1.validate()?;
    p.psi2.validate()?;
    let (h, w) = s1.dims();
    let lag = ((p.beta * p.delay).round() as usize) % w;
    let df = s1.freq_resolution;
    let g1: Vec<f64> = (0..h).map(|i| p.psi1.gain_at(i as f64 * df)).collect();
    let g2: Vec<f64> = (0..h).map(|i| p.psi2.gain_at(i as f64 * df)).collect();
    let (a, b) = (&s1.magnitudes, &s2.magnitudes);
    let out = Array2::from_shape_fn((h, w), |(i, j)| {
        let delayed = b[[i, (j + w - lag) % w]];
        p.alpha * g1[i] * a[[i, j]] + (1.0 - p.alpha) * g2[i] * delayed
    });
    Ok(s1.with_magnitudes(out))
}

// ---------------------------------------------------------------------------
// Time shift

/// Moves columns `[t..]` in front of `[..t]`. `t` is drawn from `1..=width`
/// when not given.
pub fn rand_time_shift_spec(
    spec: &Spectrogram,
    t: Option<usize>,
    rng: &mut RngStream,
) -> Result<Spectrogram> {
    check_non_empty(spec)?;
    let w = spec.cols();
    let t = match t {
        Some(t) if t == 0 || t > w => {
            return Err(Error::param("t", format!("must be in 1..={w}, got {t}")))
        }
        Some(t) => t,
        None => rng.random_range(1..=w),
    };
    Ok(shift(spec, 0, -(t as i64)))
}

// ---------------------------------------------------------------------------
// Warp and mask

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarpMaskParams {
    /// Interior control columns; the first and last column stay fixed.
    pub control_points: usize,
    /// Largest horizontal displacement in columns; `None` means 5% of width.
    pub max_disp: Option<f64>,
    pub row_mask_width: usize,
    pub col_mask_width: usize,
    pub row_mask_count: usize,
    pub col_mask_count: usize,
}

impl Default for WarpMaskParams {
    fn default() -> Self {
        Self {
            control_points: 5,
            max_disp: None,
            row_mask_width: 5,
            col_mask_width: 15,
            row_mask_count: 2,
            col_mask_count: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpMaskDraw {
    pub displacements: Vec<f64>,
    pub row_starts: Vec<usize>,
    pub col_starts: Vec<usize>,
}

impl WarpMaskParams {
    fn check(&self, spec: &Spectrogram) -> Result<()> {
        let (h, w) = spec.dims();
        if h < self.row_mask_width || w < self.col_mask_width || h == 0 || w == 0 {
            return Err(Error::TooSmall(format!(
                "{h}x{w} spectrogram is smaller than the {}-row / {}-column mask bands",
                self.row_mask_width, self.col_mask_width
            )));
        }
        Ok(())
    }

    pub fn draw(&self, spec: &Spectrogram, rng: &mut RngStream) -> Result<WarpMaskDraw> {
        self.check(spec)?;
        let (h, w) = spec.dims();
        let max_disp = self.max_disp.unwrap_or(0.05 * w as f64).max(0.0);
        let displacements = (0..self.control_points)
            .map(|_| uniform(rng, (-max_disp, max_disp)))
            .collect();
        let row_starts = (0..self.row_mask_count)
            .map(|_| rng.random_range(0..=h - self.row_mask_width))
            .collect();
        let col_starts = (0..self.col_mask_count)
            .map(|_| rng.random_range(0..=w - self.col_mask_width))
            .collect();
        Ok(WarpMaskDraw {
            displacements,
            row_starts,
            col_starts,
        })
    }
}

pub fn random_image_warp(
    spec: &Spectrogram,
    p: &WarpMaskParams,
    rng: &mut RngStream,
) -> Result<Spectrogram> {
    let draw = p.draw(spec, rng)?;
    random_image_warp_with(spec, p, &draw)
}

/// Horizontal-only warp followed by zeroing the row and column bands.
///
/// The warp is the monotone piecewise-linear column map through the control
/// columns: control column `x_j` is moved to `x_j + d_j` and every other
/// column is interpolated linearly between neighbouring controls.
pub fn random_image_warp_with(
    spec: &Spectrogram,
    p: &WarpMaskParams,
    draw: &WarpMaskDraw,
) -> Result<Spectrogram> {
    p.check(spec)?;
    let (h, w) = spec.dims();
    if draw.displacements.len() != p.control_points {
        return Err(Error::param(
            "displacements",
            "one per control point required",
        ));
    }

    let mut out = if w < 2 || draw.displacements.iter().all(|&d| d == 0.0) {
        spec.magnitudes.clone()
    } else {
        let (src, dst) = warp_knots(w, &draw.displacements);
        let sources: Vec<f64> = (0..w).map(|c| invert_knots(&src, &dst, c as f64)).collect();
        let m = &spec.magnitudes;
        Array2::from_shape_fn((h, w), |(i, j)| sample_column(m, i, sources[j]))
    };

    for &r in &draw.row_starts {
        let end = (r + p.row_mask_width).min(h);
        out.slice_mut(ndarray::s![r..end, ..]).fill(0.0);
    }
    for &c in &draw.col_starts {
        let end = (c + p.col_mask_width).min(w);
        out.slice_mut(ndarray::s![.., c..end]).fill(0.0);
    }
    Ok(spec.with_magnitudes(out))
}

/// Control knots `(source, destination)`; destinations are forced strictly
/// increasing and inside `[0, w-1]`.
fn warp_knots(w: usize, displacements: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let last = (w - 1) as f64;
    let k = displacements.len();
    let mut src = vec![0.0];
    let mut dst = vec![0.0];
    for (j, d) in displacements.iter().enumerate() {
        let x = last * (j + 1) as f64 / (k + 1) as f64;
        src.push(x);
        dst.push(x + d);
    }
    src.push(last);
    dst.push(last);
    // Clamp into a strictly increasing sequence; spacing is split evenly
    // when a displacement would fold the map.
    for j in 1..dst.len() - 1 {
        let remaining = (dst.len() - 1 - j) as f64;
        let lo = dst[j - 1];
        let min_gap = ((last - lo) / (remaining + 1.0)).min(1e-3);
        dst[j] = dst[j].clamp(lo + min_gap, last - remaining * min_gap);
    }
    (src, dst)
}

fn invert_knots(src: &[f64], dst: &[f64], y: f64) -> f64 {
    let seg = dst
        .windows(2)
        .position(|p| y <= p[1])
        .unwrap_or(dst.len() - 2);
    let (y0, y1) = (dst[seg], dst[seg + 1]);
    let (x0, x1) = (src[seg], src[seg + 1]);
    x0 + (y - y0) * (x1 - x0) / (y1 - y0)
}

// ---------------------------------------------------------------------------
// Protocol

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectroParams {
    pub shifts: ShiftParams,
    pub sum_mode: SumMode,
    pub vtln: VtlnParams,
    pub emda: EmdaRanges,
    pub warp: WarpMaskParams,
}

impl SpectroParams {
    /// Checks the parameters that do not depend on a spectrogram's size.
    pub fn validate(&self) -> Result<()> {
        let fraction = |name: &'static str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::param(name, "must be in [0, 1]"))
            }
        };
        let range = |name: &'static str, (lo, hi): (f64, f64), min: f64| {
            if lo >= min && lo <= hi && hi.is_finite() {
                Ok(())
            } else {
                Err(Error::param(
                    name,
                    format!("need {min} <= lo <= hi, got [{lo}, {hi}]"),
                ))
            }
        };
        fraction("max_row_fraction", self.shifts.max_row_fraction)?;
        fraction("max_col_fraction", self.shifts.max_col_fraction)?;
        let v = &self.vtln;
        range("alpha_range", v.alpha_range, f64::MIN_POSITIVE)?;
        if v.slices == 0 {
            return Err(Error::param("slices", "must be positive"));
        }
        if !(0.0..1.0).contains(&v.crop_fraction) {
            return Err(Error::param("crop_fraction", "must be in [0, 1)"));
        }
        for (name, f) in [("f0", v.f0), ("f_max", v.f_max)] {
            if f.is_some_and(|f| !(f > 0.0 && f.is_finite())) {
                return Err(Error::param(name, "must be positive"));
            }
        }
        let e = &self.emda;
        if !(e.max_delay >= 0.0 && e.max_delay.is_finite()) {
            return Err(Error::param("max_delay", "must be non-negative"));
        }
        range("f0", e.f0, f64::MIN_POSITIVE)?;
        range("q", e.q, f64::MIN_POSITIVE)?;
        range("gain_db", e.gain_db, f64::MIN)?;
        if self
            .warp
            .max_disp
            .is_some_and(|d| !(d >= 0.0 && d.is_finite()))
        {
            return Err(Error::param("max_disp", "must be non-negative"));
        }
        Ok(())
    }
}

/// Output names of [`spectro_protocol`], in order.
pub const SPECTRO_TRANSFORMS: [&str; 6] = [
    "random_shifts",
    "same_class_sum",
    "vtln",
    "emda",
    "rand_time_shift",
    "random_image_warp",
];

/// The six Spectro-protocol variants of `spec`, in [`SPECTRO_TRANSFORMS`]
/// order. `classmate` must be a same-class spectrogram of equal size.
pub fn spectro_protocol(
    spec: &Spectrogram,
    classmate: &Spectrogram,
    p: &SpectroParams,
    rng: &mut RngStream,
) -> Result<Vec<Spectrogram>> {
    use Error as E;
    let names = SPECTRO_TRANSFORMS;
    let emda_params = EmdaParams::draw(&p.emda, rng);
    Ok(vec![
        random_shifts(spec, &p.shifts, rng).map_err(E::in_transform(names[0]))?,
        same_class_sum(spec, classmate, p.sum_mode).map_err(E::in_transform(names[1]))?,
        vtln(spec, &p.vtln, rng).map_err(E::in_transform(names[2]))?,
        emda(spec, classmate, &emda_params).map_err(E::in_transform(names[3]))?,
        rand_time_shift_spec(spec, None, rng).map_err(E::in_transform(names[4]))?,
        random_image_warp(spec, &p.warp, rng).map_err(E::in_transform(names[5]))?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Spectrogram {
        Spectrogram {
            magnitudes: Array2::from_shape_fn((rows, cols), |(i, j)| f(i, j)),
            freq_resolution: 31.25,
            time_resolution: 0.008,
            source_sample_rate: 16000,
        }
    }

    fn ramp(rows: usize, cols: usize) -> Spectrogram {
        spec(rows, cols, |i, j| {
            1.0 + i as f64 * 0.5 + (j as f64 * 0.37).sin().abs()
        })
    }

    fn max_abs_diff(a: &Spectrogram, b: &Spectrogram) -> f64 {
        (&a.magnitudes - &b.magnitudes)
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    #[test]
    fn shift_examples() {
        let s = spec(3, 3, |i, j| (i * 3 + j) as f64);
        assert_eq!(shift(&s, 0, 0), s);
        let r = shift(&s, 1, 0);
        assert_eq!(r.magnitudes.row(1), s.magnitudes.row(0));
        assert_eq!(r.magnitudes.row(2), s.magnitudes.row(1));
        assert_eq!(r.magnitudes.row(0), s.magnitudes.row(2));
        assert_eq!(shift(&shift(&s, 2, -1), -2, 1), s);
    }

    #[test]
    fn same_class_sum_examples() {
        let a = ramp(4, 5);
        assert_eq!(same_class_sum(&a, &a, SumMode::Mean).unwrap(), a);
        let z = spec(4, 5, |_, _| 0.0);
        let half = same_class_sum(&a, &z, SumMode::Mean).unwrap();
        assert_eq!(half.magnitudes, &a.magnitudes * 0.5);
        let x = spec(1, 1, |_, _| 4.0);
        let y = spec(1, 1, |_, _| 2.0);
        assert_eq!(
            same_class_sum(&x, &y, SumMode::Mean).unwrap().magnitudes[[0, 0]],
            3.0
        );
        assert_eq!(
            same_class_sum(&x, &y, SumMode::Sum).unwrap().magnitudes[[0, 0]],
            6.0
        );
        assert!(same_class_sum(&a, &ramp(4, 6), SumMode::Mean).is_err());
    }

    #[test]
    fn vtln_warp_anchors() {
        let f_max = 8000.0;
        let f0 = 0.5 * f_max;
        for alpha in [0.9, 1.0, 1.1] {
            assert!((vtln_warp(f0, alpha, f0, f_max) - alpha * f0).abs() < 1e-12 * f_max);
            assert!((vtln_warp(f_max, alpha, f0, f_max) - f_max).abs() < 1e-12 * f_max);
            for f in [0.0, 100.0, 3999.0, 4000.0, 6500.0, 8000.0] {
                let back = vtln_unwarp(vtln_warp(f, alpha, f0, f_max), alpha, f0, f_max);
                assert!((back - f).abs() < 1e-9);
            }
        }
        assert!((vtln_warp(0.25 * f_max, 1.1, f0, f_max) - 0.275 * f_max).abs() < 1e-12 * f_max);
    }

    #[test]
    fn vtln_unit_alpha_is_identity() {
        let s = ramp(40, 30);
        let p = VtlnParams {
            alpha_range: (1.0, 1.0),
            crop_fraction: 0.0,
            ..VtlnParams::default()
        };
        let mut rng = RngStream::new(5);
        let out = vtln(&s, &p, &mut rng).unwrap();
        assert!(max_abs_diff(&out, &s) < 1e-9);
    }

    #[test]
    fn vtln_keeps_dims_and_rejects_narrow() {
        let s = ramp(40, 30);
        let mut rng = RngStream::new(5);
        let out = vtln(&s, &VtlnParams::default(), &mut rng).unwrap();
        assert_eq!(out.dims(), s.dims());
        assert!(out.is_valid());
        assert!(vtln(&ramp(40, 9), &VtlnParams::default(), &mut rng).is_err());
    }

    #[test]
    fn vtln_moves_a_line_by_alpha() {
        // A single bright row at 1000 Hz with alpha 1.1 everywhere lands at 1100 Hz.
        let s = spec(257, 20, |i, _| if i == 32 { 1.0 } else { 0.0 });
        let p = VtlnParams {
            crop_fraction: 0.0,
            ..VtlnParams::default()
        };
        let draw = VtlnDraw {
            crop: 0,
            crop_left: false,
            alphas: vec![1.1; 10],
        };
        let out = vtln_with(&s, &p, &draw).unwrap();
        let col = out.magnitudes.column(0);
        let peak = (0..257)
            .max_by(|&a, &b| col[a].partial_cmp(&col[b]).unwrap())
            .unwrap();
        assert_eq!(peak, (1100.0f64 / 31.25).round() as usize);
    }

    #[test]
    fn emda_degenerate_cases() {
        let a = ramp(20, 12);
        let b = spec(20, 12, |i, j| (i + 2 * j) as f64);
        let p = EmdaParams {
            alpha: 1.0,
            beta: 0.3,
            delay: 10.0,
            psi1: Equalizer::FLAT,
            psi2: Equalizer {
                f0: 500.0,
                gain_db: 6.0,
                q: 2.0,
            },
        };
        assert_eq!(emda(&a, &b, &p).unwrap(), a);
        let p = EmdaParams {
            alpha: 0.5,
            beta: 0.0,
            delay: 30.0,
            psi1: Equalizer::FLAT,
            psi2: Equalizer::FLAT,
        };
        assert!(max_abs_diff(&emda(&a, &a, &p).unwrap(), &a) < 1e-12);
    }

    #[test]
    fn emda_gain_at_centre_frequency() {
        let eq = Equalizer {
            f0: 1000.0,
            gain_db: 6.0,
            q: 3.0,
        };
        assert!((eq.gain_at(1000.0) - 1.9953).abs() < 1e-4);
        let a = spec(40, 4, |_, _| 1.0);
        let p = EmdaParams {
            alpha: 1.0,
            beta: 0.0,
            delay: 0.0,
            psi1: eq,
            psi2: Equalizer::FLAT,
        };
        let out = emda(&a, &a, &p).unwrap();
        assert!((out.magnitudes[[32, 0]] - 1.9953).abs() < 1e-4);
    }

    #[test]
    fn emda_delays_second_input() {
        let a = spec(2, 6, |_, _| 0.0);
        let b = spec(2, 6, |_, j| j as f64);
        let p = EmdaParams {
            alpha: 0.0,
            beta: 0.5,
            delay: 4.0,
            psi1: Equalizer::FLAT,
            psi2: Equalizer::FLAT,
        };
        let out = emda(&a, &b, &p).unwrap();
        assert_eq!(
            out.magnitudes.row(0).to_vec(),
            vec![4.0, 5.0, 0.0, 1.0, 2.0, 3.0]
        );
    }

    #[test]
    fn time_shift_spec_examples() {
        let s = spec(1, 4, |_, j| j as f64);
        let mut rng = RngStream::new(0);
        let out = rand_time_shift_spec(&s, Some(1), &mut rng).unwrap();
        assert_eq!(out.magnitudes.row(0).to_vec(), vec![1.0, 2.0, 3.0, 0.0]);
        assert_eq!(rand_time_shift_spec(&s, Some(4), &mut rng).unwrap(), s);
        let back = rand_time_shift_spec(
            &rand_time_shift_spec(&s, Some(3), &mut rng).unwrap(),
            Some(1),
            &mut rng,
        )
        .unwrap();
        assert_eq!(back, s);
        assert!(rand_time_shift_spec(&s, Some(0), &mut rng).is_err());
    }

    #[test]
    fn warp_without_displacement_only_masks() {
        let s = ramp(30, 40);
        let p = WarpMaskParams::default();
        let draw = WarpMaskDraw {
            displacements: vec![0.0; 5],
            row_starts: vec![3, 20],
            col_starts: vec![10],
        };
        let out = random_image_warp_with(&s, &p, &draw).unwrap();
        let in_band = |i: usize, j: usize| {
            (3..8).contains(&i) || (20..25).contains(&i) || (10..25).contains(&j)
        };
        for ((i, j), v) in out.magnitudes.indexed_iter() {
            if in_band(i, j) {
                assert_eq!(*v, 0.0);
            } else {
                assert_eq!(*v, s.magnitudes[[i, j]]);
            }
        }
    }

    #[test]
    fn zeroed_cell_count_matches_band_union() {
        let s = ramp(30, 40);
        let p = WarpMaskParams::default();
        for seed in 0..50 {
            let mut rng = RngStream::new(seed);
            let draw = p.draw(&s, &mut rng).unwrap();
            let out = random_image_warp_with(&s, &p, &draw).unwrap();
            let zeros = out.magnitudes.iter().filter(|v| **v == 0.0).count();
            // Inclusion-exclusion over the drawn bands.
            let (h, w) = (30usize, 40usize);
            let (r1, r2) = (draw.row_starts[0], draw.row_starts[1]);
            let row_overlap = (r1 + 5).min(r2 + 5).saturating_sub(r1.max(r2));
            let rows_zeroed = 10 - row_overlap;
            let expected = rows_zeroed * w + 15 * h - rows_zeroed * 15;
            assert_eq!(zeros, expected, "seed {seed}");
        }
    }

    #[test]
    fn warp_is_monotone_and_bounded() {
        let (src, dst) = warp_knots(40, &[5.0, -5.0, 30.0, -30.0, 0.0]);
        assert!(dst.windows(2).all(|p| p[0] < p[1]));
        assert_eq!(src.first(), dst.first());
        assert_eq!(src.last(), dst.last());
        let s = ramp(10, 40);
        let draw = WarpMaskDraw {
            displacements: vec![2.0, -1.5, 0.5, 1.0, -2.0],
            row_starts: vec![],
            col_starts: vec![],
        };
        let p = WarpMaskParams {
            row_mask_count: 0,
            col_mask_count: 0,
            ..WarpMaskParams::default()
        };
        let out = random_image_warp_with(&s, &p, &draw).unwrap();
        assert_eq!(out.dims(), s.dims());
        assert!(out.is_valid());
        assert_eq!(out.magnitudes.column(0), s.magnitudes.column(0));
        assert_eq!(out.magnitudes.column(39), s.magnitudes.column(39));
    }

    #[test]
    fn warp_rejects_small_inputs() {
        let mut rng = RngStream::new(0);
        assert!(random_image_warp(&ramp(4, 40), &WarpMaskParams::default(), &mut rng).is_err());
        assert!(random_image_warp(&ramp(30, 14), &WarpMaskParams::default(), &mut rng).is_err());
    }

    #[test]
    fn protocol_outputs() {
        let a = ramp(64, 50);
        let b = spec(64, 50, |i, j| ((i * j) % 7) as f64);
        let p = SpectroParams::default();
        let out = spectro_protocol(&a, &b, &p, &mut RngStream::new(9)).unwrap();
        assert_eq!(out.len(), 6);
        assert!(out.iter().all(|o| o.dims() == a.dims() && o.is_valid()));
        assert_eq!(
            out,
            spectro_protocol(&a, &b, &p, &mut RngStream::new(9)).unwrap()
        );
        let err = spectro_protocol(&a, &ramp(64, 49), &p, &mut RngStream::new(9)).unwrap_err();
        assert!(matches!(
            err,
            Error::Transform {
                name: "same_class_sum",
                ..
            }
        ));
    }

    proptest::proptest! {
        #[test]
        fn time_shift_spec_preserves_columns(cols in 1usize..30, seed in 0u64..500) {
            let s = spec(3, cols, |i, j| (i * 100 + j) as f64);
            let out = rand_time_shift_spec(&s, None, &mut RngStream::new(seed)).unwrap();
            let mut a: Vec<Vec<u64>> = out.magnitudes.columns().into_iter().map(|c| c.iter().map(|v| v.to_bits()).collect()).collect();
            let mut b: Vec<Vec<u64>> = s.magnitudes.columns().into_iter().map(|c| c.iter().map(|v| v.to_bits()).collect()).collect();
            a.sort();
            b.sort();
            proptest::prop_assert_eq!(a, b);
        }
    }
}
