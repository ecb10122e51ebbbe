//! Training-time masking: SpecAugment-style bands on log-Mel, random
//! zeroing of bands in the DCT domain.
//!
//! Randomness comes from xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`), so mask streams are identical on
//! every platform. For each axis (mel/spectral rows first, then frame/temporal
//! columns) the draw is:
//!
//! 1. `count` uniform in `0..=max_masks_per_axis`
//! 2. per mask, `width` uniform in `0..=floor(max_width_fraction * axis_len)`
//!    and `start` uniform in `0..=axis_len - width`.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{FeatureKind, FeatureMatrix};

pub type AugmentRng = Xoshiro256PlusPlus;

pub fn rng_from_seed(seed: u64) -> AugmentRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Independent stream for one worker: `base_seed ^ worker_index`.
pub fn worker_rng(base_seed: u64, worker_index: u64) -> AugmentRng {
    rng_from_seed(base_seed ^ worker_index)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub max_masks_per_axis: usize,
    pub max_width_fraction: f64,
    /// `None` selects the domain default: matrix mean for log-Mel, 0 for DCT.
    pub fill_value: Option<f64>,
    pub seed: u64,
}

impl Default for MaskSpec {
    fn default() -> Self {
        Self {
            max_masks_per_axis: 2,
            max_width_fraction: 0.1,
            fill_value: None,
            seed: 0,
        }
    }
}

impl MaskSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_width_fraction > 0.0 && self.max_width_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "mask width fraction must be in (0, 1], got {}",
                self.max_width_fraction
            )));
        }
        if let Some(f) = self.fill_value {
            if !f.is_finite() {
                return Err(Error::InvalidConfig("mask fill must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.max_masks_per_axis == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskDraw {
    pub axis: Axis,
    pub start: usize,
    pub width: usize,
}

/// Draw the bands for a `rows x cols` matrix.
pub fn draw_masks(rows: usize, cols: usize, spec: &MaskSpec, rng: &mut AugmentRng) -> Vec<MaskDraw> {
    let mut draws = Vec::new();
    for (axis, len) in [(Axis::Rows, rows), (Axis::Cols, cols)] {
        let count = rng.random_range(0..=spec.max_masks_per_axis);
        let max_width = ((spec.max_width_fraction * len as f64).floor() as usize).min(len);
        for _ in 0..count {
            let width = rng.random_range(0..=max_width);
            let start = rng.random_range(0..=len - width);
            draws.push(MaskDraw { axis, start, width });
        }
    }
    draws
}

/// Overwrite every band in `draws` with `fill`.
pub fn apply_masks(matrix: &FeatureMatrix, draws: &[MaskDraw], fill: f64) -> FeatureMatrix {
    let mut out = matrix.clone();
    let (rows, cols) = matrix.shape();
    for d in draws {
        match d.axis {
            Axis::Rows => {
                for r in d.start..(d.start + d.width).min(rows) {
                    for c in 0..cols {
                        out.set(r, c, fill);
                    }
                }
            }
            Axis::Cols => {
                for r in 0..rows {
                    for c in d.start..(d.start + d.width).min(cols) {
                        out.set(r, c, fill);
                    }
                }
            }
        }
    }
    out
}

/// SpecAugment-style frequency and time masking of a log-Mel matrix.
pub fn spec_mask(logmel: &FeatureMatrix, spec: &MaskSpec, rng: &mut AugmentRng) -> Result<FeatureMatrix> {
    if logmel.kind() != FeatureKind::LogMel {
        return Err(Error::InvalidConfig(format!(
            "spec_mask expects log-Mel input, got {:?}",
            logmel.kind()
        )));
    }
    spec.validate()?;
    let fill = spec.fill_value.unwrap_or_else(|| logmel.mean());
    let draws = draw_masks(logmel.rows(), logmel.cols(), spec, rng);
    Ok(apply_masks(logmel, &draws, fill))
}

/// Random zeroing of spectral/temporal modulation bands.
pub fn dct_zero_mask(feature: &FeatureMatrix, spec: &MaskSpec, rng: &mut AugmentRng) -> Result<FeatureMatrix> {
    if !feature.kind().is_modulation() {
        return Err(Error::InvalidConfig(format!(
            "dct_zero_mask expects a modulation feature, got {:?}",
            feature.kind()
        )));
    }
    spec.validate()?;
    let fill = spec.fill_value.unwrap_or(0.0);
    let draws = draw_masks(feature.rows(), feature.cols(), spec, rng);
    Ok(apply_masks(feature, &draws, fill))
}

/// Dispatch on the feature kind: log-Mel gets [`spec_mask`], modulation
/// features get [`dct_zero_mask`]; other kinds pass through.
pub fn augment_feature(feature: &FeatureMatrix, spec: &MaskSpec, rng: &mut AugmentRng) -> Result<FeatureMatrix> {
    match feature.kind() {
        FeatureKind::LogMel => spec_mask(feature, spec, rng),
        k if k.is_modulation() => dct_zero_mask(feature, spec, rng),
        _ => Ok(feature.clone()),
    }
}
