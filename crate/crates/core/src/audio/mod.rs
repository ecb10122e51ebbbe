//! Audio clips, WAV decoding and the fixed analysis window.

mod wav;

pub use wav::{decode_wav, read_wav, write_wav_pcm16, WavSpec};

use crate::error::{Error, Result};

/// Pipeline sample rate used when nothing else is configured (ASVspoof LA).
pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

/// Mono PCM audio with samples nominally in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::EmptyInput("audio clip has no samples"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("audio sample {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Cut or zero-pad a clip to exactly `round(seconds * sample_rate)` samples,
/// keeping the head of the clip.
pub fn fix_duration(clip: &AudioClip, seconds: f64) -> Result<AudioClip> {
    fix_duration_with_offset(clip, seconds, 0.0)
}

/// Like [`fix_duration`], but the window starts `offset_seconds` into the clip.
pub fn fix_duration_with_offset(
    clip: &AudioClip,
    seconds: f64,
    offset_seconds: f64,
) -> Result<AudioClip> {
    if clip.is_empty() {
        return Err(Error::EmptyInput("cannot fix the duration of an empty clip"));
    }
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "duration must be positive, got {seconds}"
        )));
    }
    if !(offset_seconds.is_finite() && offset_seconds >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "offset must be non-negative, got {offset_seconds}"
        )));
    }
    let sr = clip.sample_rate as f64;
    let target = (seconds * sr).round() as usize;
    if target == 0 {
        return Err(Error::InvalidConfig(format!(
            "{seconds} s at {sr} Hz rounds to zero samples"
        )));
    }
    let start = (offset_seconds * sr).round() as usize;
    if start >= clip.len() {
        return Err(Error::EmptyInput("offset lies past the end of the clip"));
    }

    let available = &clip.samples[start..];
    let mut out = Vec::with_capacity(target);
    out.extend_from_slice(&available[..available.len().min(target)]);
    out.resize(target, 0.0);
    Ok(AudioClip {
        samples: out,
        sample_rate: clip.sample_rate,
    })
}
