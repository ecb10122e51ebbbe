//! Resolved pipeline configuration (JSON).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::MaskSpec;
use crate::classifier::TrainConfig;
use crate::dsp::{FeatureSpec, MelConfig, NormMode, StftConfig};
use crate::error::{Error, Result};
use crate::eval::CostModel;

/// File name of the resolved configuration written next to every output.
pub const RESOLVED_CONFIG: &str = "config.json";

/// Offset mixed into the base seed for the masking stream, so the mask
/// draws and the weight initialization never share a generator state.
pub const MASK_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub sample_rate: u32,
    pub duration_seconds: f64,
    pub offset_seconds: f64,
    pub stft: StftConfig,
    pub mel: MelConfig,
    pub feature: FeatureSpec,
    pub norm: NormMode,
    pub augment: MaskSpec,
    pub train: TrainConfig,
    pub cost: CostModel,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mut cfg = Self {
            sample_rate: 16_000,
            duration_seconds: 4.0,
            offset_seconds: 0.0,
            stft: StftConfig::default(),
            mel: MelConfig::default(),
            feature: FeatureSpec::GlobalMod,
            norm: NormMode::Standardize,
            augment: MaskSpec::default(),
            train: TrainConfig::default(),
            cost: CostModel::default(),
            seed: 0,
        };
        cfg.set_seed(0);
        cfg
    }
}

impl PipelineConfig {
    /// Set the base seed and the seeds derived from it.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
        self.augment.seed = seed ^ MASK_SEED_OFFSET;
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.mel.validate()?;
        if self.mel.sample_rate != self.sample_rate {
            return Err(Error::InvalidConfig(format!(
                "mel sample rate {} differs from pipeline rate {}",
                self.mel.sample_rate, self.sample_rate
            )));
        }
        if !(self.duration_seconds > 0.0 && self.duration_seconds.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "duration must be positive, got {}",
                self.duration_seconds
            )));
        }
        if !(self.offset_seconds >= 0.0 && self.offset_seconds.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "offset must be non-negative, got {}",
                self.offset_seconds
            )));
        }
        let len = (self.duration_seconds * self.sample_rate as f64).round() as usize;
        if self.stft.n_frames(len).is_none() {
            return Err(Error::TooShort {
                len,
                win_length: self.stft.win_length,
            });
        }
        self.augment.validate()?;
        self.train.validate()?;
        self.cost.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Write `config.json` into `dir`.
    pub fn write_resolved(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join(RESOLVED_CONFIG);
        fs::write(&path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    /// Mask spec used during training, `None` when masking is disabled.
    pub fn mask(&self) -> Option<&MaskSpec> {
        (!self.augment.is_identity()).then_some(&self.augment)
    }
}
