//! Run configuration: one TOML file plus command-line overrides.

use std::path::Path;

use lungnet::dataset::{PhantomSpec, SplitRatios};
use lungnet::explain::DEFAULT_OVERLAY_ALPHA;
use lungnet::imagecore::{HuWindow, SliceBand};
use lungnet::nn::TrainConfig;
use lungnet::{AugmentParams, CropParams};
use serde::Deserialize;

use crate::error::{CliError, Result};

/// Smallest square input TinyNet's three pooling stages accept.
pub const MIN_IMAGE_SIZE: usize = lungnet::nn::TINYNET_MIN_SIDE;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvertConfig {
    pub window: HuWindow,
    pub band: SliceBand,
}

impl Default for ConvertConfig {
    fn default() -> Self {
        Self {
            window: HuWindow::LUNG,
            band: SliceBand::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub alpha: f64,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_OVERLAY_ALPHA,
        }
    }
}

/// Every tunable of the pipeline.
///
/// The root `seed` replaces the `seed` fields of the `augment`, `train` and
/// `phantoms` tables, so one number pins down a whole run.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Side of the square network input.
    pub image_size: usize,
    pub freeze_backbone: bool,
    pub crop: CropParams,
    pub augment: AugmentParams,
    pub train: TrainConfig,
    pub split: SplitRatios,
    pub phantoms: PhantomSpec,
    pub convert: ConvertConfig,
    pub explain: ExplainConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            image_size: 224,
            freeze_backbone: true,
            crop: CropParams::default(),
            augment: AugmentParams::default(),
            train: TrainConfig::default(),
            split: SplitRatios::default(),
            phantoms: PhantomSpec::default(),
            convert: ConvertConfig::default(),
            explain: ExplainConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::usage(format!("invalid config: {e}")))
    }

    /// Reads `path`, or returns the defaults when no file is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text).map_err(|e| e.at(p))
            }
        }
    }

    /// Sets the root seed and pushes it into every seeded stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.augment.seed = seed;
        self.train.seed = seed;
        self.phantoms.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size < MIN_IMAGE_SIZE {
            return Err(CliError::usage(format!("image_size must be at least {MIN_IMAGE_SIZE}")));
        }
        self.crop.validate()?;
        self.augment.validate()?;
        self.train.validate()?;
        self.split.validate()?;
        self.phantoms.validate()?;
        HuWindow::new(self.convert.window.lo(), self.convert.window.hi())?;
        let band = self.convert.band;
        if !(0.0 <= band.lo && band.lo < band.hi && band.hi <= 1.0) {
            return Err(CliError::usage(format!(
                "invalid slice band ({}, {}); need 0 <= lo < hi <= 1",
                band.lo, band.hi
            )));
        }
        if !(0.0..=1.0).contains(&self.explain.alpha) {
            return Err(CliError::usage("explain.alpha must lie in [0, 1]"));
        }
        Ok(())
    }
}
