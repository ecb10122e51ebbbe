use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::matrix::{FeatureKind, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    Hann,
    Hamming,
}

impl WindowKind {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let (a0, a1) = match self {
            WindowKind::Hann => (0.5, 0.5),
            WindowKind::Hamming => (0.54, 0.46),
        };
        (0..n)
            .map(|i| a0 - a1 * (2.0 * PI * i as f64 / n as f64).cos())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub n_fft: usize,
    pub win_length: usize,
    pub hop_length: usize,
    pub window: WindowKind,
    pub center: bool,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            n_fft: 1024,
            win_length: 400,
            hop_length: 160,
            window: WindowKind::Hann,
            center: false,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.n_fft.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "n_fft {} is not a power of two",
                self.n_fft
            )));
        }
        if !(0 < self.hop_length
            && self.hop_length <= self.win_length
            && self.win_length <= self.n_fft)
        {
            return Err(Error::InvalidConfig(format!(
                "need 0 < hop ({}) <= win ({}) <= n_fft ({})",
                self.hop_length, self.win_length, self.n_fft
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> Option<usize> {
        let padded = if self.center {
            len + 2 * (self.win_length / 2)
        } else {
            len
        };
        self.frames_in(padded)
    }

    fn frames_in(&self, padded: usize) -> Option<usize> {
        if padded < self.win_length {
            None
        } else {
            Some(1 + (padded - self.win_length) / self.hop_length)
        }
    }
}

/// One-sided complex spectrogram, stored bin-major (`bins x frames`).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    bins: usize,
    frames: usize,
    data: Vec<Complex64>,
}

impl ComplexSpectrogram {
    pub fn new(bins: usize, frames: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != bins * frames {
            return Err(Error::Shape(format!(
                "{} values for {bins} bins x {frames} frames",
                data.len()
            )));
        }
        Ok(Self { bins, frames, data })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[bin * self.frames + frame]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
}

/// Reusable STFT: window and FFT plan are built once per configuration.
pub struct Stft {
    cfg: StftConfig,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl Stft {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = FftPlanner::new().plan_fft_forward(cfg.n_fft);
        Ok(Self {
            cfg,
            window: cfg.window.coefficients(cfg.win_length),
            fft,
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn process(&self, signal: &[f64]) -> Result<ComplexSpectrogram> {
        let cfg = &self.cfg;
        let padded;
        let signal = if cfg.center {
            padded = reflect_pad(signal, cfg.win_length / 2)?;
            &padded[..]
        } else {
            signal
        };
        let frames = cfg.frames_in(signal.len()).ok_or(Error::TooShort {
            len: signal.len(),
            win_length: cfg.win_length,
        })?;
        let bins = cfg.n_bins();

        let mut data = vec![Complex64::default(); bins * frames];
        let mut buf = vec![Complex64::default(); cfg.n_fft];
        let mut scratch = vec![Complex64::default(); self.fft.get_inplace_scratch_len()];
        for f in 0..frames {
            let start = f * cfg.hop_length;
            let frame = &signal[start..start + cfg.win_length];
            for (slot, (x, w)) in buf.iter_mut().zip(frame.iter().zip(&self.window)) {
                *slot = Complex64::new(x * w, 0.0);
            }
            buf[cfg.win_length..].fill(Complex64::default());
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for (b, v) in buf[..bins].iter().enumerate() {
                data[b * frames + f] = *v;
            }
        }
        Ok(ComplexSpectrogram { bins, frames, data })
    }
}

fn reflect_pad(signal: &[f64], pad: usize) -> Result<Vec<f64>> {
    if pad == 0 {
        return Ok(signal.to_vec());
    }
    if signal.len() <= pad {
        return Err(Error::TooShort {
            len: signal.len(),
            win_length: 2 * pad,
        });
    }
    let mut out = Vec::with_capacity(signal.len() + 2 * pad);
    out.extend((1..=pad).rev().map(|i| signal[i]));
    out.extend_from_slice(signal);
    let n = signal.len();
    out.extend((0..pad).map(|i| signal[n - 2 - i]));
    Ok(out)
}

pub fn stft(clip: &AudioClip, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    Stft::new(*cfg)?.process(clip.samples())
}

/// `|X|^2` per bin and frame.
pub fn power_spectrogram(spec: &ComplexSpectrogram) -> Result<FeatureMatrix> {
    let values = spec.data.iter().map(|c| c.norm_sqr()).collect();
    FeatureMatrix::new(spec.bins, spec.frames, values, FeatureKind::PowerSpec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft_frame(frame: &[f64], n_fft: usize) -> Vec<Complex64> {
        (0..n_fft / 2 + 1)
            .map(|k| {
                frame
                    .iter()
                    .enumerate()
                    .map(|(n, &x)| {
                        let ang = -2.0 * PI * (k * n) as f64 / n_fft as f64;
                        Complex64::new(x * ang.cos(), x * ang.sin())
                    })
                    .sum()
            })
            .collect()
    }

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, 16_000).unwrap()
    }

    #[test]
    fn four_seconds_gives_398_frames() {
        let spec = stft(&clip(vec![0.0; 64_000]), &StftConfig::default()).unwrap();
        assert_eq!(spec.frames(), 398);
        assert_eq!(spec.bins(), 513);
        assert!(spec.data().iter().all(|c| c.norm_sqr() == 0.0));
    }

    #[test]
    fn bin_centred_cosine_matches_naive_dft() {
        let cfg = StftConfig {
            n_fft: 256,
            win_length: 256,
            hop_length: 128,
            window: WindowKind::Hann,
            center: false,
        };
        let k0 = 20;
        let signal: Vec<f64> = (0..2048)
            .map(|n| (2.0 * PI * k0 as f64 * n as f64 / 256.0).cos())
            .collect();
        let spec = stft(&clip(signal.clone()), &cfg).unwrap();
        let window = WindowKind::Hann.coefficients(256);
        for f in 0..spec.frames() {
            let frame: Vec<f64> = signal[f * 128..f * 128 + 256]
                .iter()
                .zip(&window)
                .map(|(x, w)| x * w)
                .collect();
            let oracle = naive_dft_frame(&frame, 256);
            for (b, o) in oracle.iter().enumerate() {
                assert!((spec.get(b, f) - o).norm() < 1e-9);
            }
            // Hann leakage spreads the line over k0-1..=k0+1 only.
            let total: f64 = (0..spec.bins()).map(|b| spec.get(b, f).norm_sqr()).sum();
            let near: f64 = (k0 - 1..=k0 + 1).map(|b| spec.get(b, f).norm_sqr()).sum();
            assert!(near / total >= 0.99);
        }
    }

    #[test]
    fn zero_padded_window_matches_naive_dft() {
        let cfg = StftConfig::default();
        let signal: Vec<f64> = (0..2000).map(|n| ((n * n) as f64 * 1e-4).sin()).collect();
        let spec = stft(&clip(signal.clone()), &cfg).unwrap();
        let window = WindowKind::Hann.coefficients(400);
        for f in [0, 3, spec.frames() - 1] {
            let frame: Vec<f64> = signal[f * 160..f * 160 + 400]
                .iter()
                .zip(&window)
                .map(|(x, w)| x * w)
                .collect();
            for (b, o) in naive_dft_frame(&frame, 1024).iter().enumerate() {
                assert!((spec.get(b, f) - o).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn power_of_three_four_i() {
        let spec = ComplexSpectrogram::new(1, 1, vec![Complex64::new(3.0, 4.0)]).unwrap();
        assert_eq!(power_spectrogram(&spec).unwrap().get(0, 0), 25.0);
    }

    #[test]
    fn parseval_on_one_sided_power() {
        let cfg = StftConfig::default();
        let signal: Vec<f64> = (0..4000).map(|n| ((n * 7919) % 1000) as f64 / 500.0 - 1.0).collect();
        let power = power_spectrogram(&stft(&clip(signal.clone()), &cfg).unwrap()).unwrap();
        let window = WindowKind::Hann.coefficients(400);
        let half = cfg.n_fft / 2;
        for f in 0..power.cols() {
            let energy: f64 = signal[f * 160..f * 160 + 400]
                .iter()
                .zip(&window)
                .map(|(x, w)| (x * w).powi(2))
                .sum();
            let mut spectral = power.get(0, f) + power.get(half, f);
            spectral += 2.0 * (1..half).map(|b| power.get(b, f)).sum::<f64>();
            let rel = (spectral / cfg.n_fft as f64 - energy).abs() / energy;
            assert!(rel < 1e-6, "frame {f}: rel {rel}");
        }
    }

    #[test]
    fn too_short_signal() {
        let err = stft(&clip(vec![0.0; 399]), &StftConfig::default()).unwrap_err();
        assert!(matches!(err, Error::TooShort { len: 399, .. }));
    }

    #[test]
    fn centred_frames_and_reflection() {
        let cfg = StftConfig {
            center: true,
            ..StftConfig::default()
        };
        assert_eq!(cfg.n_frames(64_000), Some(401));
        assert_eq!(reflect_pad(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), vec![
            3.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 2.0
        ]);
        let spec = stft(&clip(vec![0.1; 64_000]), &cfg).unwrap();
        assert_eq!(spec.frames(), 401);
    }

    #[test]
    fn invalid_configs() {
        let bad = |cfg: StftConfig| cfg.validate().is_err();
        assert!(bad(StftConfig { n_fft: 1000, ..StftConfig::default() }));
        assert!(bad(StftConfig { hop_length: 0, ..StftConfig::default() }));
        assert!(bad(StftConfig { win_length: 2048, ..StftConfig::default() }));
        assert!(bad(StftConfig { hop_length: 500, ..StftConfig::default() }));
    }
}
