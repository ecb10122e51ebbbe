//! Seeded synthetic bonafide/spoof corpus.
//!
//! A bonafide clip is a harmonic source with vibrato and spectral tilt plus
//! broadband noise, shaped by a quasi-periodic syllable envelope (jittered
//! onsets, random rate) and a slow random drift. Its spoof partner is the
//! same clip with the part above `artifact_cutoff_hz` multiplied by
//! `1 + depth * cos(2 pi n / (P * hop) + phi)`, a strictly periodic
//! frame-amplitude modulation with period `P` frames. The phase is zero
//! (locked to the clip start) unless `random_phase` is set.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::AudioClip;
use crate::augment::{worker_rng, AugmentRng};
use crate::error::{Error, Result};
use crate::protocol::{AttackId, Key, ProtocolEntry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub clips_per_class: usize,
    pub seconds: f64,
    pub sample_rate: u32,
    pub seed: u64,
    /// Artifact period in analysis frames.
    pub artifact_period_frames: f64,
    pub artifact_depth: f64,
    /// Lower edge of the modulated band in Hz; 0 modulates the whole signal.
    pub artifact_cutoff_hz: f64,
    pub random_phase: bool,
    pub hop_length: usize,
    /// Syllable rate range in Hz.
    pub syllable_rate: (f64, f64),
    /// Relative jitter of syllable onsets (fraction of the nominal spacing).
    pub syllable_jitter: f64,
    /// Peak-to-floor depth of the syllable envelope in nepers.
    pub envelope_depth: f64,
    pub noise_level: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            clips_per_class: 400,
            seconds: 4.0,
            sample_rate: 16_000,
            seed: 0,
            artifact_period_frames: 40.0,
            artifact_depth: 0.3,
            artifact_cutoff_hz: 2000.0,
            random_phase: false,
            hop_length: 160,
            syllable_rate: (3.0, 6.0),
            syllable_jitter: 0.25,
            envelope_depth: 1.5,
            noise_level: 0.05,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.clips_per_class == 0 || self.sample_rate == 0 || self.hop_length == 0 {
            return bad("clip count, sample rate and hop must be positive".into());
        }
        if !(self.seconds > 0.0) {
            return bad(format!("clip length {} must be positive", self.seconds));
        }
        if !(self.artifact_period_frames >= 2.0) {
            return bad(format!(
                "artifact period {} must span at least 2 frames",
                self.artifact_period_frames
            ));
        }
        if !(0.0..1.0).contains(&self.artifact_depth) {
            return bad(format!("artifact depth {} must be in [0, 1)", self.artifact_depth));
        }
        if !(0.0..self.sample_rate as f64 / 2.0).contains(&self.artifact_cutoff_hz) {
            return bad(format!("artifact cutoff {} Hz outside [0, Nyquist)", self.artifact_cutoff_hz));
        }
        let (lo, hi) = self.syllable_rate;
        if !(lo > 0.0 && lo <= hi) {
            return bad(format!("bad syllable rate range ({lo}, {hi})"));
        }
        Ok(())
    }

    /// Artifact frequency in Hz.
    pub fn artifact_hz(&self) -> f64 {
        self.sample_rate as f64 / (self.hop_length as f64 * self.artifact_period_frames)
    }
}

/// One generated clip with its protocol labels. Clips `2i` and `2i + 1` are
/// the bonafide/spoof pair built from the same source.
#[derive(Debug, Clone)]
pub struct SynthClip {
    pub pair: usize,
    pub entry: ProtocolEntry,
    pub clip: AudioClip,
}

fn source(cfg: &SynthConfig, rng: &mut AugmentRng) -> Vec<f64> {
    let sr = cfg.sample_rate as f64;
    let n = (cfg.seconds * sr).round() as usize;
    let f0 = rng.random_range(90.0..220.0);
    let vib_rate = rng.random_range(3.0..6.0);
    let vib_depth = rng.random_range(0.005..0.03);
    let vib_phase = rng.random_range(0.0..2.0 * PI);
    let tilt = rng.random_range(0.8..1.6);
    let n_harm = ((0.45 * sr / f0).floor() as usize).max(1);
    let amps: Vec<f64> = (1..=n_harm)
        .map(|k| (k as f64).powf(-tilt) * rng.random_range(0.5..1.0))
        .collect();
    let phases: Vec<f64> = (0..n_harm).map(|_| rng.random_range(0.0..2.0 * PI)).collect();

    // Syllable onsets with jittered spacing.
    let rate = rng.random_range(cfg.syllable_rate.0..=cfg.syllable_rate.1);
    let spacing = 1.0 / rate;
    let mut onsets = Vec::new();
    let mut t = -rng.random_range(0.0..spacing);
    while t < cfg.seconds + spacing {
        onsets.push(t);
        let j = cfg.syllable_jitter;
        t += spacing * (1.0 + rng.random_range(-j..=j));
    }
    let drift_hz = rng.random_range(0.1..0.5);
    let drift_phase = rng.random_range(0.0..2.0 * PI);
    let drift_depth = rng.random_range(0.0..0.3);

    let mut out = vec![0.0; n];
    let mut phase = 0.0;
    let mut syl = 0usize;
    for (i, y) in out.iter_mut().enumerate() {
        let ts = i as f64 / sr;
        let inst_f0 = f0 * (1.0 + vib_depth * (2.0 * PI * vib_rate * ts + vib_phase).sin());
        phase += 2.0 * PI * inst_f0 / sr;
        let mut voiced = 0.0;
        for (k, (a, p)) in amps.iter().zip(&phases).enumerate() {
            voiced += a * ((k + 1) as f64 * phase + p).sin();
        }
        let noise: f64 = StandardNormal.sample(rng);
        while syl + 1 < onsets.len() && onsets[syl + 1] <= ts {
            syl += 1;
        }
        // Raised-cosine bump over the current syllable.
        let (s0, s1) = (onsets[syl], onsets.get(syl + 1).copied().unwrap_or(onsets[syl] + spacing));
        let u = ((ts - s0) / (s1 - s0)).clamp(0.0, 1.0);
        let bump = 0.5 - 0.5 * (2.0 * PI * u).cos();
        let log_env = cfg.envelope_depth * (bump - 1.0)
            + drift_depth * (2.0 * PI * drift_hz * ts + drift_phase).sin();
        *y = log_env.exp() * (voiced + cfg.noise_level * noise);
    }
    out
}

fn scale_to_peak(mut x: Vec<f64>, peak: f64) -> Vec<f64> {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        x.iter_mut().for_each(|v| *v *= peak / m);
    }
    x
}

/// Split `x` into the parts below and at or above `cutoff_hz` with an ideal
/// FFT filter. The two parts sum back to `x`.
pub fn split_band(x: &[f64], sample_rate: u32, cutoff_hz: f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    if n == 0 || cutoff_hz <= 0.0 {
        return (vec![0.0; n], x.to_vec());
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f64 * sample_rate as f64 / n as f64;
        if f < cutoff_hz {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let high: Vec<f64> = buf.iter().map(|c| c.re / n as f64).collect();
    let low = x.iter().zip(&high).map(|(a, b)| a - b).collect();
    (low, high)
}

/// Apply the periodic frame-amplitude artifact to the band above the cutoff.
pub fn inject_artifact(samples: &[f64], cfg: &SynthConfig, phase: f64) -> Vec<f64> {
    let period = cfg.artifact_period_frames * cfg.hop_length as f64;
    let (low, high) = split_band(samples, cfg.sample_rate, cfg.artifact_cutoff_hz);
    low.iter()
        .zip(&high)
        .enumerate()
        .map(|(i, (&l, &h))| l + h * (1.0 + cfg.artifact_depth * (2.0 * PI * i as f64 / period + phase).cos()))
        .collect()
}

/// Generate `clips_per_class` pairs. Each pair draws from its own stream
/// (`seed ^ pair`), so the corpus does not depend on thread scheduling.
pub fn generate(cfg: &SynthConfig) -> Result<Vec<SynthClip>> {
    cfg.validate()?;
    let pairs: Vec<Result<[SynthClip; 2]>> = (0..cfg.clips_per_class)
        .into_par_iter()
        .map(|pair| {
            let mut rng = worker_rng(cfg.seed, pair as u64);
            let base = source(cfg, &mut rng);
            let phi = if cfg.random_phase {
                rng.random_range(0.0..2.0 * PI)
            } else {
                0.0
            };
            let spoof = inject_artifact(&base, cfg, phi);
            let make = |samples: Vec<f64>, key: Key| -> Result<SynthClip> {
                let (tag, attack) = match key {
                    Key::Bonafide => ("B", AttackId::Bonafide),
                    Key::Spoof => ("S", AttackId::Other("SYN".into())),
                };
                Ok(SynthClip {
                    pair,
                    entry: ProtocolEntry {
                        speaker_id: format!("SYN_{pair:04}"),
                        utterance_id: format!("SYN_{tag}_{pair:05}"),
                        attack_id: attack,
                        key,
                    },
                    clip: AudioClip::new(scale_to_peak(samples, 0.5), cfg.sample_rate)?,
                })
            };
            Ok([make(base, Key::Bonafide)?, make(spoof, Key::Spoof)?])
        })
        .collect();
    let mut out = Vec::with_capacity(2 * cfg.clips_per_class);
    for p in pairs {
        out.extend(p?);
    }
    Ok(out)
}
