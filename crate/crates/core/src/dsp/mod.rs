//! Spectral front end and modulation features.
//!
//! The global modulation feature is the chain
//! `stft -> |X|^2 -> Mel filterbank -> ln -> 2-D DCT -> (normalize)`.

pub mod dct;
pub mod mel;
pub mod modulation;
pub mod normalize;
pub mod stft;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dct::{dct2_1d, idct2_1d, DctPlan};
pub use mel::{hz_to_mel, log_mel, mel_to_hz, MelConfig, MelFilterbank, LOG_FLOOR};
pub use modulation::{band_restricted_modulation, blocked_modulation, dct2_forward, mfcc, Band};
pub use normalize::{
    apply_normalizer, decode_normalizer, encode_normalizer, fit_normalizer, read_normalizer,
    write_normalizer, NormMode, Normalized, Normalizer,
};
pub use stft::{power_spectrogram, stft, ComplexSpectrogram, Stft, StftConfig, WindowKind};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Which representation to extract from a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FeatureSpec {
    LogMel,
    Mfcc { n_coeffs: usize },
    GlobalMod,
    BlockedMod { grid_rows: usize, grid_cols: usize },
    BandMod(Band),
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec::GlobalMod
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSpec::LogMel => f.write_str("logmel"),
            FeatureSpec::Mfcc { n_coeffs } => write!(f, "mfcc:{n_coeffs}"),
            FeatureSpec::GlobalMod => f.write_str("global-mod"),
            FeatureSpec::BlockedMod {
                grid_rows,
                grid_cols,
            } => write!(f, "blocked-mod:{grid_rows}x{grid_cols}"),
            FeatureSpec::BandMod(Band::LowHalf) => f.write_str("band-mod:low"),
            FeatureSpec::BandMod(Band::HighHalf) => f.write_str("band-mod:high"),
        }
    }
}

impl FromStr for FeatureSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        match (name, arg) {
            ("logmel", None) => Ok(FeatureSpec::LogMel),
            ("mfcc", None) => Ok(FeatureSpec::Mfcc { n_coeffs: 20 }),
            ("mfcc", Some(n)) => n
                .parse()
                .map(|n_coeffs| FeatureSpec::Mfcc { n_coeffs })
                .map_err(|_| format!("bad MFCC coefficient count {n:?}")),
            ("global-mod", None) => Ok(FeatureSpec::GlobalMod),
            ("blocked-mod", grid) => {
                let grid = grid.unwrap_or("2x2");
                let (r, c) = grid
                    .split_once('x')
                    .ok_or_else(|| format!("bad grid {grid:?}, expected RxC"))?;
                let parse = |t: &str| t.parse::<usize>().map_err(|_| format!("bad grid {grid:?}"));
                Ok(FeatureSpec::BlockedMod {
                    grid_rows: parse(r)?,
                    grid_cols: parse(c)?,
                })
            }
            ("band-mod", Some("low")) => Ok(FeatureSpec::BandMod(Band::LowHalf)),
            ("band-mod", Some("high")) => Ok(FeatureSpec::BandMod(Band::HighHalf)),
            _ => Err(format!(
                "unknown feature {s:?}; expected logmel, mfcc[:N], global-mod, \
                 blocked-mod:RxC or band-mod:{{low,high}}"
            )),
        }
    }
}

impl TryFrom<String> for FeatureSpec {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FeatureSpec> for String {
    fn from(f: FeatureSpec) -> String {
        f.to_string()
    }
}

/// STFT plan and Mel filterbank shared across clips.
pub struct FeatureExtractor {
    stft: Stft,
    bank: MelFilterbank,
    sample_rate: u32,
}

impl FeatureExtractor {
    pub fn new(stft_cfg: StftConfig, mel_cfg: MelConfig) -> Result<Self> {
        let stft = Stft::new(stft_cfg)?;
        let bank = MelFilterbank::new(&mel_cfg, stft_cfg.n_fft)?;
        Ok(Self {
            stft,
            bank,
            sample_rate: mel_cfg.sample_rate,
        })
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.bank
    }

    pub fn log_mel(&self, clip: &AudioClip) -> Result<FeatureMatrix> {
        if clip.sample_rate() != self.sample_rate {
            return Err(Error::RateMismatch {
                expected: self.sample_rate,
                found: clip.sample_rate(),
            });
        }
        let power = power_spectrogram(&self.stft.process(clip.samples())?)?;
        log_mel(&power, &self.bank)
    }

    /// Un-normalized feature of the requested kind.
    pub fn extract(&self, clip: &AudioClip, spec: FeatureSpec) -> Result<FeatureMatrix> {
        let lm = self.log_mel(clip)?;
        match spec {
            FeatureSpec::LogMel => Ok(lm),
            FeatureSpec::Mfcc { n_coeffs } => mfcc(&lm, n_coeffs),
            FeatureSpec::GlobalMod => dct2_forward(&lm),
            FeatureSpec::BlockedMod {
                grid_rows,
                grid_cols,
            } => blocked_modulation(&lm, grid_rows, grid_cols),
            FeatureSpec::BandMod(band) => band_restricted_modulation(&lm, band),
        }
    }
}

/// The global modulation feature of a clip (already cut to the analysis
/// duration), normalized by `norm`.
pub fn global_modulation(
    clip: &AudioClip,
    stft_cfg: &StftConfig,
    mel_cfg: &MelConfig,
    norm: &Normalizer,
) -> Result<FeatureMatrix> {
    let extractor = FeatureExtractor::new(*stft_cfg, *mel_cfg)?;
    let dct = extractor.extract(clip, FeatureSpec::GlobalMod)?;
    Ok(norm.apply(&dct)?.matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::FeatureKind;

    #[test]
    fn feature_spec_strings() {
        for s in [
            "logmel",
            "mfcc:13",
            "global-mod",
            "blocked-mod:2x2",
            "band-mod:low",
            "band-mod:high",
        ] {
            let spec: FeatureSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
        assert!("blocked-mod:2y2".parse::<FeatureSpec>().is_err());
        assert!("cqcc".parse::<FeatureSpec>().is_err());
    }

    #[test]
    fn silent_clip_has_only_dc() {
        let clip = AudioClip::new(vec![0.0; 64_000], 16_000).unwrap();
        let g = global_modulation(
            &clip,
            &StftConfig::default(),
            &MelConfig::default(),
            &Normalizer::None,
        )
        .unwrap();
        assert_eq!(g.shape(), (80, 398));
        let expected = LOG_FLOOR.ln() * ((80 * 398) as f64).sqrt();
        assert!((g.get(0, 0) - expected).abs() < 1e-9);
        assert!(g.values()[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn composition_equals_manual_chain() {
        let samples: Vec<f64> = (0..16_000)
            .map(|n| 0.3 * (n as f64 * 0.07).sin() + 0.1 * (n as f64 * 0.013).cos())
            .collect();
        let clip = AudioClip::new(samples, 16_000).unwrap();
        let (s, m) = (StftConfig::default(), MelConfig::default());
        let manual = {
            let power = power_spectrogram(&stft(&clip, &s).unwrap()).unwrap();
            let bank = MelFilterbank::new(&m, s.n_fft).unwrap();
            let d = dct2_forward(&log_mel(&power, &bank).unwrap()).unwrap();
            Normalizer::L1.apply(&d).unwrap().matrix
        };
        let piped = global_modulation(&clip, &s, &m, &Normalizer::L1).unwrap();
        assert_eq!(piped.kind(), FeatureKind::GlobalMod);
        assert_eq!(piped, manual);
        let again = global_modulation(&clip, &s, &m, &Normalizer::L1).unwrap();
        assert!(piped
            .values()
            .iter()
            .zip(again.values())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn rate_mismatch_in_extractor() {
        let fx = FeatureExtractor::new(StftConfig::default(), MelConfig::default()).unwrap();
        let clip = AudioClip::new(vec![0.0; 8_000], 8_000).unwrap();
        assert!(matches!(fx.log_mel(&clip), Err(Error::RateMismatch { .. })));
    }
}
