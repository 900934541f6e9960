//! The five augmentation protocols and dispatch over item kinds.

use std::fmt;
use std::str::FromStr;

use image::GrayImage;
use rand::Rng;

use crate::audio::{resample, AudioSignal};
use crate::dgt::Spectrogram;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_aug::{standard_img_protocol, AffineAugParams};
use crate::rng::RngStream;
use crate::signal::{
    add_noise, gain, pitch_shift, signal_protocol, NoiseParams, SignalParams, SIGNAL_TRANSFORMS,
};
use crate::spectro::{spectro_protocol, SpectroParams, SPECTRO_TRANSFORMS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolKind {
    NoAug,
    StandardImg,
    StandardSgn,
    Signal,
    Spectro,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 5] = [
        ProtocolKind::NoAug,
        ProtocolKind::StandardImg,
        ProtocolKind::StandardSgn,
        ProtocolKind::Signal,
        ProtocolKind::Spectro,
    ];

    /// Short token used on the command line and in derived ids.
    pub fn token(self) -> &'static str {
        match self {
            ProtocolKind::NoAug => "none",
            ProtocolKind::StandardImg => "std-img",
            ProtocolKind::StandardSgn => "std-sgn",
            ProtocolKind::Signal => "signal",
            ProtocolKind::Spectro => "spectro",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::NoAug => "NoAUG",
            ProtocolKind::StandardImg => "StandardIMG",
            ProtocolKind::StandardSgn => "StandardSGN",
            ProtocolKind::Signal => "Signal",
            ProtocolKind::Spectro => "Spectro",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProtocolKind::ALL
            .into_iter()
            .find(|k| k.token().eq_ignore_ascii_case(s) || k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param("protocol", format!("unknown protocol `{s}`")))
    }
}

/// Random-gated composition of five standard audio transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StdSgnParams {
    pub copies: usize,
    pub fire_probability: f64,
    pub speed_range: (f64, f64),
    pub semitone_range: (f64, f64),
    pub volume_db_range: (f64, f64),
    pub snr_db_range: (f64, f64),
    pub time_shift_secs_range: (f64, f64),
}

impl Default for StdSgnParams {
    fn default() -> Self {
        Self {
            copies: 10,
            fire_probability: 0.5,
            speed_range: (0.8, 1.2),
            semitone_range: (-2.0, 2.0),
            volume_db_range: (-3.0, 3.0),
            snr_db_range: (0.0, 10.0),
            time_shift_secs_range: (-0.005, 0.005),
        }
    }
}

impl StdSgnParams {
    pub fn validate(&self) -> Result<()> {
        if self.copies == 0 {
            return Err(Error::param("copies", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.fire_probability) {
            return Err(Error::param("fire_probability", "must be in [0, 1]"));
        }
        for (name, (lo, hi)) in [
            ("speed_range", self.speed_range),
            ("semitone_range", self.semitone_range),
            ("volume_db_range", self.volume_db_range),
            ("snr_db_range", self.snr_db_range),
            ("time_shift_secs_range", self.time_shift_secs_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::param(name, "need finite lo <= hi"));
            }
        }
        if self.speed_range.0 <= 0.0 {
            return Err(Error::param("speed_range", "factors must be positive"));
        }
        Ok(())
    }
}

pub const STD_SGN_TRANSFORMS: [&str; 5] = ["speed", "pitch", "volume", "noise", "time_shift"];

/// Choices for one StandardSGN output.
#[derive(Debug, Clone, PartialEq)]
pub struct StdSgnDraw {
    pub fire: [bool; 5],
    pub speed: f64,
    pub semitones: f64,
    pub volume_db: f64,
    pub snr_db: f64,
    pub time_shift_secs: f64,
}

impl StdSgnDraw {
    pub fn draw(p: &StdSgnParams, rng: &mut RngStream) -> Self {
        let mut fire = [false; 5];
        for f in &mut fire {
            *f = rng.random_bool(p.fire_probability);
        }
        let mut u = |(lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo..=hi)
            }
        };
        Self {
            fire,
            speed: u(p.speed_range),
            semitones: u(p.semitone_range),
            volume_db: u(p.volume_db_range),
            snr_db: u(p.snr_db_range),
            time_shift_secs: u(p.time_shift_secs_range),
        }
    }

    /// Names of the transforms that fire, joined by `+`; `none` when empty.
    pub fn label(&self) -> String {
        let fired: Vec<&str> = STD_SGN_TRANSFORMS
            .iter()
            .zip(self.fire)
            .filter_map(|(n, f)| f.then_some(*n))
            .collect();
        if fired.is_empty() {
            "none".into()
        } else {
            fired.join("+")
        }
    }

    /// Applies the firing transforms in order: speed, pitch, volume, noise,
    /// time shift. The shift is circular by `round(secs * rate)` samples.
    pub fn apply(&self, s: &AudioSignal, rng: &mut RngStream) -> Result<AudioSignal> {
        let mut out = s.clone();
        if self.fire[0] {
            out = resample(&out, self.speed).map_err(Error::in_transform("speed"))?;
        }
        if self.fire[1] {
            out = pitch_shift(&out, self.semitones).map_err(Error::in_transform("pitch"))?;
        }
        if self.fire[2] {
            out = gain(&out, self.volume_db);
        }
        if self.fire[3] {
            out = add_noise(
                &out,
                &NoiseParams {
                    snr_db: self.snr_db,
                },
                rng,
            )
            .map_err(Error::in_transform("noise"))?;
        }
        if self.fire[4] {
            let k = (self.time_shift_secs * out.sample_rate as f64).round() as i64;
            let n = out.len() as i64;
            out.samples.rotate_right(k.rem_euclid(n) as usize);
        }
        Ok(out)
    }
}

/// StandardSGN: `copies` (default 10) independently gated compositions.
pub fn std_signal_protocol(
    s: &AudioSignal,
    p: &StdSgnParams,
    rng: &mut RngStream,
) -> Result<Vec<AudioSignal>> {
    Ok(std_signal_protocol_labeled(s, p, rng)?
        .into_iter()
        .map(|(_, a)| a)
        .collect())
}

fn std_signal_protocol_labeled(
    s: &AudioSignal,
    p: &StdSgnParams,
    rng: &mut RngStream,
) -> Result<Vec<(String, AudioSignal)>> {
    p.validate()?;
    s.validate()?;
    (0..p.copies)
        .map(|_| {
            let draw = StdSgnDraw::draw(p, rng);
            let mut sub = rng.fork();
            Ok((draw.label(), draw.apply(s, &mut sub)?))
        })
        .collect()
}

/// A protocol with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum AugmentationProtocol {
    NoAug,
    StandardImg {
        params: AffineAugParams,
        copies: usize,
    },
    StandardSgn(StdSgnParams),
    Signal(SignalParams),
    Spectro(SpectroParams),
}

impl AugmentationProtocol {
    pub fn kind(&self) -> ProtocolKind {
        match self {
            AugmentationProtocol::NoAug => ProtocolKind::NoAug,
            AugmentationProtocol::StandardImg { .. } => ProtocolKind::StandardImg,
            AugmentationProtocol::StandardSgn(_) => ProtocolKind::StandardSgn,
            AugmentationProtocol::Signal(_) => ProtocolKind::Signal,
            AugmentationProtocol::Spectro(_) => ProtocolKind::Spectro,
        }
    }

    /// Protocol with default parameters.
    pub fn default_for(kind: ProtocolKind) -> Self {
        match kind {
            ProtocolKind::NoAug => AugmentationProtocol::NoAug,
            ProtocolKind::StandardImg => AugmentationProtocol::StandardImg {
                params: AffineAugParams::default(),
                copies: 10,
            },
            ProtocolKind::StandardSgn => AugmentationProtocol::StandardSgn(StdSgnParams::default()),
            ProtocolKind::Signal => AugmentationProtocol::Signal(SignalParams::default()),
            ProtocolKind::Spectro => AugmentationProtocol::Spectro(SpectroParams::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AugmentationProtocol::NoAug => Ok(()),
            AugmentationProtocol::StandardImg { params, copies } => {
                if *copies == 0 {
                    return Err(Error::param("copies", "must be at least 1"));
                }
                params.validate()
            }
            AugmentationProtocol::StandardSgn(p) => p.validate(),
            AugmentationProtocol::Signal(p) => p.validate(),
            AugmentationProtocol::Spectro(p) => p.validate(),
        }
    }

    /// Number of derived items per input, excluding the original.
    pub fn derived_count(&self) -> usize {
        match self {
            AugmentationProtocol::NoAug => 0,
            AugmentationProtocol::StandardImg { copies, .. } => *copies,
            AugmentationProtocol::StandardSgn(p) => p.copies,
            AugmentationProtocol::Signal(_) => SIGNAL_TRANSFORMS.len(),
            AugmentationProtocol::Spectro(_) => SPECTRO_TRANSFORMS.len(),
        }
    }

    /// Whether the protocol draws a same-class partner.
    pub fn needs_partner(&self) -> bool {
        matches!(
            self,
            AugmentationProtocol::Signal(_) | AugmentationProtocol::Spectro(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Audio(AudioSignal),
    Spectrogram(Spectrogram),
    Image(GrayImage),
}

impl Item {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Item::Audio(_) => "audio",
            Item::Spectrogram(_) => "spectrogram",
            Item::Image(_) => "image",
        }
    }
}

/// One protocol output with the name of the transform that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub transform: String,
    pub item: Item,
}

/// Runs `protocol` on `item`. The original is always element 0 (transform
/// `identity`), followed by the protocol's derived items. Mixing protocols
/// draw their partner uniformly from `pool`.
pub fn apply_protocol(
    item: &Item,
    protocol: &AugmentationProtocol,
    pool: &[Item],
    rng: &mut RngStream,
) -> Result<Vec<Augmented>> {
    let mismatch = || Error::DomainMismatch {
        protocol: protocol.kind().name(),
        item: item.kind_name(),
    };
    let mut out = vec![Augmented {
        transform: "identity".into(),
        item: item.clone(),
    }];
    let partner = if protocol.needs_partner() {
        if pool.is_empty() {
            return Err(Error::EmptyPool);
        }
        Some(&pool[rng.random_range(0..pool.len())])
    } else {
        None
    };

    let named = |names: &[&str], items: Vec<Item>| {
        names
            .iter()
            .zip(items)
            .map(|(n, item)| Augmented {
                transform: n.to_string(),
                item,
            })
            .collect::<Vec<_>>()
    };

    match (protocol, item) {
        (AugmentationProtocol::NoAug, _) => {}
        (AugmentationProtocol::StandardImg { params, copies }, Item::Image(img)) => {
            let imgs = standard_img_protocol(img, params, *copies, rng)?;
            out.extend(imgs.into_iter().map(|i| Augmented {
                transform: "affine".into(),
                item: Item::Image(i),
            }));
        }
        (AugmentationProtocol::StandardSgn(p), Item::Audio(s)) => {
            let outs = std_signal_protocol_labeled(s, p, rng)?;
            out.extend(outs.into_iter().map(|(label, a)| Augmented {
                transform: label,
                item: Item::Audio(a),
            }));
        }
        (AugmentationProtocol::Signal(p), Item::Audio(s)) => {
            let Some(Item::Audio(mate)) = partner else {
                return Err(mismatch());
            };
            let outs = signal_protocol(s, mate, p, rng)?;
            out.extend(named(
                &SIGNAL_TRANSFORMS,
                outs.into_iter().map(Item::Audio).collect(),
            ));
        }
        (AugmentationProtocol::Spectro(p), Item::Spectrogram(s)) => {
            let Some(Item::Spectrogram(mate)) = partner else {
                return Err(mismatch());
            };
            let outs = spectro_protocol(s, mate, p, rng)?;
            out.extend(named(
                &SPECTRO_TRANSFORMS,
                outs.into_iter().map(Item::Spectrogram).collect(),
            ));
        }
        _ => return Err(mismatch()),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use std::f64::consts::PI;

    fn tone(freq: f64, n: usize) -> AudioSignal {
        AudioSignal::new(
            (0..n)
                .map(|i| 0.4 * (2.0 * PI * freq * i as f64 / 8000.0).sin())
                .collect(),
            8000,
        )
        .unwrap()
    }

    fn spec(cols: usize) -> Spectrogram {
        Spectrogram {
            magnitudes: Array2::from_shape_fn((40, cols), |(i, j)| 1.0 + ((i * j) % 5) as f64),
            freq_resolution: 15.625,
            time_resolution: 0.016,
            source_sample_rate: 8000,
        }
    }

    #[test]
    fn tokens_round_trip() {
        for k in ProtocolKind::ALL {
            assert_eq!(k.token().parse::<ProtocolKind>().unwrap(), k);
            assert_eq!(k.name().parse::<ProtocolKind>().unwrap(), k);
        }
        assert!("bogus".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn std_sgn_counts_and_determinism() {
        let s = tone(300.0, 4000);
        let p = StdSgnParams::default();
        let a = std_signal_protocol(&s, &p, &mut RngStream::new(11)).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(
            a,
            std_signal_protocol(&s, &p, &mut RngStream::new(11)).unwrap()
        );
    }

    #[test]
    fn nothing_fires_means_identity() {
        let s = tone(300.0, 4000);
        let p = StdSgnParams {
            fire_probability: 0.0,
            ..StdSgnParams::default()
        };
        let out = std_signal_protocol(&s, &p, &mut RngStream::new(2)).unwrap();
        assert!(out.iter().all(|o| *o == s));
        let draw = StdSgnDraw {
            fire: [false; 5],
            speed: 1.1,
            semitones: 1.0,
            volume_db: 2.0,
            snr_db: 3.0,
            time_shift_secs: 0.004,
        };
        assert_eq!(draw.apply(&s, &mut RngStream::new(0)).unwrap(), s);
        assert_eq!(draw.label(), "none");
    }

    #[test]
    fn std_sgn_time_shift_is_circular() {
        let s = tone(300.0, 4000);
        let draw = StdSgnDraw {
            fire: [false, false, false, false, true],
            speed: 1.0,
            semitones: 0.0,
            volume_db: 0.0,
            snr_db: 10.0,
            time_shift_secs: -0.005,
        };
        let out = draw.apply(&s, &mut RngStream::new(0)).unwrap();
        let mut expected = s.samples.clone();
        expected.rotate_left(40);
        assert_eq!(out.samples, expected);
    }

    #[test]
    fn dispatch_counts() {
        let mut rng = RngStream::new(3);
        let audio = Item::Audio(tone(300.0, 4000));
        let mate = Item::Audio(tone(350.0, 3000));
        let count = |p: &AugmentationProtocol, item: &Item, pool: &[Item], rng: &mut RngStream| {
            apply_protocol(item, p, pool, rng).unwrap().len()
        };
        assert_eq!(
            count(&AugmentationProtocol::NoAug, &audio, &[], &mut rng),
            1
        );
        assert_eq!(
            count(
                &AugmentationProtocol::default_for(ProtocolKind::Signal),
                &audio,
                std::slice::from_ref(&mate),
                &mut rng
            ),
            12
        );
        assert_eq!(
            count(
                &AugmentationProtocol::default_for(ProtocolKind::StandardSgn),
                &audio,
                &[],
                &mut rng
            ),
            11
        );
        let sp = Item::Spectrogram(spec(60));
        assert_eq!(
            count(
                &AugmentationProtocol::default_for(ProtocolKind::Spectro),
                &sp,
                &[Item::Spectrogram(spec(60))],
                &mut rng
            ),
            7
        );
        let img = Item::Image(GrayImage::from_fn(20, 20, |x, _| image::Luma([x as u8])));
        assert_eq!(
            count(
                &AugmentationProtocol::default_for(ProtocolKind::StandardImg),
                &img,
                &[],
                &mut rng
            ),
            11
        );

        let out = apply_protocol(&audio, &AugmentationProtocol::NoAug, &[], &mut rng).unwrap();
        assert_eq!(out[0].item, audio);
        assert_eq!(out[0].transform, "identity");
    }

    #[test]
    fn dispatch_errors() {
        let mut rng = RngStream::new(3);
        let sp = Item::Spectrogram(spec(60));
        let spectro = AugmentationProtocol::default_for(ProtocolKind::Spectro);
        assert!(matches!(
            apply_protocol(&sp, &spectro, &[], &mut rng),
            Err(Error::EmptyPool)
        ));
        let audio = Item::Audio(tone(300.0, 4000));
        assert!(matches!(
            apply_protocol(&audio, &spectro, std::slice::from_ref(&sp), &mut rng),
            Err(Error::DomainMismatch { .. })
        ));
        let signal = AugmentationProtocol::default_for(ProtocolKind::Signal);
        assert!(matches!(
            apply_protocol(&audio, &signal, &[sp], &mut rng),
            Err(Error::DomainMismatch { .. })
        ));
    }

    #[test]
    fn defaults_validate_and_bad_values_do_not() {
        for k in ProtocolKind::ALL {
            AugmentationProtocol::default_for(k).validate().unwrap();
        }
        let mut sig = SignalParams::default();
        sig.drc.ratio = 0.5;
        assert!(AugmentationProtocol::Signal(sig)
            .validate()
            .unwrap_err()
            .is_usage());
        let mut spec = SpectroParams::default();
        spec.vtln.slices = 0;
        assert!(AugmentationProtocol::Spectro(spec).validate().is_err());
        let img = AugmentationProtocol::StandardImg {
            params: AffineAugParams::default(),
            copies: 0,
        };
        assert!(img.validate().is_err());
    }
}
