use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{FeatureKind, FeatureMatrix};

/// Lower bound applied before the natural log of Mel energies.
pub const LOG_FLOOR: f64 = 1e-10;

/// HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub sample_rate: u32,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_mels: 80,
            f_min: 0.0,
            f_max: 8_000.0,
            sample_rate: 16_000,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.n_mels < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_mels must be at least 2, got {}",
                self.n_mels
            )));
        }
        if !(0.0 <= self.f_min && self.f_min < self.f_max && self.f_max <= nyquist) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= f_min ({}) < f_max ({}) <= {nyquist}",
                self.f_min, self.f_max
            )));
        }
        Ok(())
    }
}

/// Triangular filterbank stored sparsely: each filter keeps the first bin of
/// its support and the weights over that contiguous run.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    n_bins: usize,
    centers_hz: Vec<f64>,
    filters: Vec<(usize, Vec<f64>)>,
}

impl MelFilterbank {
    pub fn new(cfg: &MelConfig, n_fft: usize) -> Result<Self> {
        cfg.validate()?;
        if n_fft == 0 {
            return Err(Error::InvalidConfig("n_fft must be positive".into()));
        }
        let n_bins = n_fft / 2 + 1;
        let mel_lo = hz_to_mel(cfg.f_min);
        let mel_hi = hz_to_mel(cfg.f_max);
        let step = (mel_hi - mel_lo) / (cfg.n_mels + 1) as f64;
        let edges: Vec<f64> = (0..cfg.n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + step * i as f64))
            .collect();
        let bin_hz = cfg.sample_rate as f64 / n_fft as f64;

        let mut filters = Vec::with_capacity(cfg.n_mels);
        for m in 0..cfg.n_mels {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let weights: Vec<(usize, f64)> = (0..n_bins)
                .filter_map(|k| {
                    let f = k as f64 * bin_hz;
                    let up = (f - lo) / (mid - lo);
                    let down = (hi - f) / (hi - mid);
                    let w = up.min(down);
                    (w > 0.0).then_some((k, w))
                })
                .collect();
            let Some(&(start, _)) = weights.first() else {
                return Err(Error::Resolution { index: m, n_fft });
            };
            filters.push((start, weights.into_iter().map(|(_, w)| w).collect()));
        }
        Ok(Self {
            n_bins,
            centers_hz: edges[1..=cfg.n_mels].to_vec(),
            filters,
        })
    }

    /// Build a bank from explicit dense rows (each must have one contiguous support).
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n_bins = rows.first().map_or(0, Vec::len);
        let mut filters = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_bins {
                return Err(Error::Shape("ragged filterbank rows".into()));
            }
            if row.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                return Err(Error::InvalidConfig(format!(
                    "filter {i} has negative or non-finite weights"
                )));
            }
            let start = row.iter().position(|&w| w > 0.0).unwrap_or(0);
            let end = row.iter().rposition(|&w| w > 0.0).map_or(0, |e| e + 1);
            filters.push((start, row[start..end.max(start)].to_vec()));
        }
        Ok(Self {
            n_bins,
            centers_hz: Vec::new(),
            filters,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.filters.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn dense_row(&self, m: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.n_bins];
        let (start, w) = &self.filters[m];
        row[*start..start + w.len()].copy_from_slice(w);
        row
    }

    /// Mel spectrum `M = bank * power`.
    pub fn apply(&self, power: &FeatureMatrix) -> Result<FeatureMatrix> {
        if power.rows() != self.n_bins {
            return Err(Error::Shape(format!(
                "filterbank expects {} bins, power spectrogram has {}",
                self.n_bins,
                power.rows()
            )));
        }
        let frames = power.cols();
        let mut out = vec![0.0; self.n_mels() * frames];
        for (m, (start, weights)) in self.filters.iter().enumerate() {
            let dst = &mut out[m * frames..(m + 1) * frames];
            for (j, &w) in weights.iter().enumerate() {
                for (d, &p) in dst.iter_mut().zip(power.row(start + j)) {
                    *d += w * p;
                }
            }
        }
        FeatureMatrix::new(self.n_mels(), frames, out, FeatureKind::MelSpec)
    }
}

/// `ln(max(bank * power, 1e-10))`.
pub fn log_mel(power: &FeatureMatrix, bank: &MelFilterbank) -> Result<FeatureMatrix> {
    let mut mel = bank.apply(power)?;
    for v in mel.values_mut() {
        *v = v.max(LOG_FLOOR).ln();
    }
    Ok(mel.with_kind(FeatureKind::LogMel))
}
