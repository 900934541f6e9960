//! TOML run configuration. Every section is optional and falls back to the
//! library defaults; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use audioaug::image_aug::AffineAugParams;
use audioaug::protocols::{AugmentationProtocol, ProtocolKind, StdSgnParams};
use audioaug::signal::SignalParams;
use audioaug::spectro::SpectroParams;
use audioaug::DgtParams;
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub folds: Option<usize>,
    pub jobs: Option<usize>,
    pub dgt: DgtParams,
    pub signal: SignalParams,
    pub spectro: SpectroParams,
    pub std_sgn: StdSgnParams,
    pub std_img: StdImgConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StdImgConfig {
    pub copies: usize,
    pub affine: AffineAugParams,
}

impl Default for StdImgConfig {
    fn default() -> Self {
        Self {
            copies: 10,
            affine: AffineAugParams::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, String> {
        let c: Config = toml::from_str(text).map_err(|e| e.to_string())?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("config {}: {e}", path.display()))
    }

    fn validate(&self) -> Result<(), String> {
        if self.folds.is_some_and(|k| k < 2) {
            return Err("`folds` must be at least 2".into());
        }
        self.dgt.validate().map_err(|e| e.to_string())?;
        for kind in ProtocolKind::ALL {
            self.protocol(kind)
                .validate()
                .map_err(|e| format!("[{}] {e}", section(kind)))?;
        }
        Ok(())
    }

    pub fn protocol(&self, kind: ProtocolKind) -> AugmentationProtocol {
        match kind {
            ProtocolKind::NoAug => AugmentationProtocol::NoAug,
            ProtocolKind::StandardImg => AugmentationProtocol::StandardImg {
                params: self.std_img.affine,
                copies: self.std_img.copies,
            },
            ProtocolKind::StandardSgn => AugmentationProtocol::StandardSgn(self.std_sgn.clone()),
            ProtocolKind::Signal => AugmentationProtocol::Signal(self.signal.clone()),
            ProtocolKind::Spectro => AugmentationProtocol::Spectro(self.spectro.clone()),
        }
    }
}

fn section(kind: ProtocolKind) -> &'static str {
    match kind {
        ProtocolKind::NoAug => "none",
        ProtocolKind::StandardImg => "std_img",
        ProtocolKind::StandardSgn => "std_sgn",
        ProtocolKind::Signal => "signal",
        ProtocolKind::Spectro => "spectro",
    }
}
