//! Random affine augmentation of rendered spectrogram images.

use image::{GrayImage, Luma};
use rand::Rng;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AffineAugParams {
    pub p_reflect_x: f64,
    pub p_reflect_y: f64,
    pub scale_range: (f64, f64),
    pub rotation_range_deg: (f64, f64),
    pub translation_range_px: (f64, f64),
}

impl Default for AffineAugParams {
    fn default() -> Self {
        Self {
            p_reflect_x: 0.5,
            p_reflect_y: 0.5,
            scale_range: (1.0, 2.0),
            rotation_range_deg: (-10.0, 10.0),
            translation_range_px: (0.0, 5.0),
        }
    }
}

impl AffineAugParams {
    /// Parameters under which [`random_affine`] is the identity.
    pub fn identity() -> Self {
        Self {
            p_reflect_x: 0.0,
            p_reflect_y: 0.0,
            scale_range: (1.0, 1.0),
            rotation_range_deg: (0.0, 0.0),
            translation_range_px: (0.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_reflect_x", self.p_reflect_x),
            ("p_reflect_y", self.p_reflect_y),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(name, "probability must be in [0, 1]"));
            }
        }
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if !ordered(self.scale_range) || self.scale_range.0 <= 0.0 {
            return Err(Error::param("scale_range", "need 0 < lo <= hi"));
        }
        if !ordered(self.rotation_range_deg) {
            return Err(Error::param("rotation_range_deg", "need lo <= hi"));
        }
        if !ordered(self.translation_range_px) {
            return Err(Error::param("translation_range_px", "need lo <= hi"));
        }
        Ok(())
    }

    pub fn draw(&self, rng: &mut RngStream) -> AffineDraw {
        let mut range = |(lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        };
        let scale_x = range(self.scale_range);
        let scale_y = range(self.scale_range);
        let rotation_deg = range(self.rotation_range_deg);
        let tx = range(self.translation_range_px);
        let ty = range(self.translation_range_px);
        AffineDraw {
            reflect_x: rng.random_bool(self.p_reflect_x),
            reflect_y: rng.random_bool(self.p_reflect_y),
            scale_x,
            scale_y,
            rotation_deg,
            tx,
            ty,
        }
    }
}

/// One concrete affine transform. `x` runs along columns, `y` along rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineDraw {
    pub reflect_x: bool,
    pub reflect_y: bool,
    pub scale_x: f64,
    pub scale_y: f64,
    pub rotation_deg: f64,
    pub tx: f64,
    pub ty: f64,
}

impl AffineDraw {
    pub const IDENTITY: AffineDraw = AffineDraw {
        reflect_x: false,
        reflect_y: false,
        scale_x: 1.0,
        scale_y: 1.0,
        rotation_deg: 0.0,
        tx: 0.0,
        ty: 0.0,
    };
}

pub fn random_affine(
    img: &GrayImage,
    p: &AffineAugParams,
    rng: &mut RngStream,
) -> Result<GrayImage> {
    p.validate()?;
    let draw = p.draw(rng);
    apply_affine(img, &draw)
}

/// Reflection, scaling and rotation about the image centre, then
/// translation. Sampling is bilinear through the inverse map; pixels whose
/// source falls outside the image are 0.
pub fn apply_affine(img: &GrayImage, d: &AffineDraw) -> Result<GrayImage> {
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::TooSmall("empty image".into()));
    }
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let (sin, cos) = d.rotation_deg.to_radians().sin_cos();
    let max_x = (w - 1) as f64;
    let max_y = (h - 1) as f64;
    const EDGE: f64 = 1e-9;

    Ok(GrayImage::from_fn(w, h, |x, y| {
        // Undo translation, then rotation, then scaling, then reflection.
        let u = x as f64 - d.tx - cx;
        let v = y as f64 - d.ty - cy;
        let ru = cos * u + sin * v;
        let rv = -sin * u + cos * v;
        let mut sx = ru / d.scale_x + cx;
        let mut sy = rv / d.scale_y + cy;
        if d.reflect_x {
            sx = max_x - sx;
        }
        if d.reflect_y {
            sy = max_y - sy;
        }
        if sx < -EDGE || sy < -EDGE || sx > max_x + EDGE || sy > max_y + EDGE {
            return Luma([0]);
        }
        Luma([bilinear(img, sx.clamp(0.0, max_x), sy.clamp(0.0, max_y))])
    }))
}

fn bilinear(img: &GrayImage, x: f64, y: f64) -> u8 {
    let (w, h) = img.dimensions();
    let x0 = x.floor() as u32;
    let y0 = y.floor() as u32;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let p = |xx, yy| img.get_pixel(xx, yy).0[0] as f64;
    let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
    let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
    (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8
}

/// `copies` independent affine draws of `img`.
pub fn standard_img_protocol(
    img: &GrayImage,
    p: &AffineAugParams,
    copies: usize,
    rng: &mut RngStream,
) -> Result<Vec<GrayImage>> {
    if copies == 0 {
        return Err(Error::param("copies", "must be at least 1"));
    }
    (0..copies).map(|_| random_affine(img, p, rng)).collect()
}
