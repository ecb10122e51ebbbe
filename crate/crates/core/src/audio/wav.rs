//! Minimal RIFF/WAVE reader and PCM16 writer.
//!
//! Integer PCM (16/24/32-bit) and 32-bit IEEE float are decoded; multichannel
//! audio is averaged to mono. The pipeline never resamples, so a clip whose
//! rate differs from the configured one is an error.

use std::fs;
use std::path::Path;

use super::AudioClip;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Parsed `fmt ` chunk plus the frame count declared by the `data` chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavSpec {
    pub format_tag: u16,
    pub channels: u16,
    pub sample_rate: u32,
    pub bits_per_sample: u16,
    pub frames: usize,
}

pub fn read_wav(path: impl AsRef<Path>, expected_rate: u32) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes, expected_rate).map(|(clip, _)| clip)
}

pub fn decode_wav(bytes: &[u8], expected_rate: u32) -> Result<(AudioClip, WavSpec)> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("missing RIFF/WAVE header".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| {
                Error::Format(format!(
                    "chunk {:?} declares {size} bytes past end of file",
                    String::from_utf8_lossy(id)
                ))
            })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::Format("fmt chunk shorter than 16 bytes".into()));
                }
                let mut tag = u16::from_le_bytes([body[0], body[1]]);
                let channels = u16::from_le_bytes([body[2], body[3]]);
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let block_align = u16::from_le_bytes([body[12], body[13]]);
                let bits = u16::from_le_bytes([body[14], body[15]]);
                if tag == FORMAT_EXTENSIBLE {
                    // The sub-format GUID starts with the effective format tag.
                    if body.len() < 26 {
                        return Err(Error::Format("truncated WAVE_FORMAT_EXTENSIBLE".into()));
                    }
                    tag = u16::from_le_bytes([body[24], body[25]]);
                }
                fmt = Some((tag, channels, rate, block_align, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word aligned.
        pos = body_end + (size & 1);
    }

    let (format_tag, channels, sample_rate, block_align, bits) =
        fmt.ok_or_else(|| Error::Format("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Format("no data chunk".into()))?;

    if channels == 0 {
        return Err(Error::Format("zero channels".into()));
    }
    let supported = matches!(
        (format_tag, bits),
        (FORMAT_PCM, 16) | (FORMAT_PCM, 24) | (FORMAT_PCM, 32) | (FORMAT_FLOAT, 32)
    );
    if !supported {
        return Err(Error::UnsupportedEncoding {
            format_tag,
            bits,
        });
    }
    let bytes_per_sample = bits as usize / 8;
    let frame_bytes = bytes_per_sample * channels as usize;
    if block_align as usize != frame_bytes {
        return Err(Error::Format(format!(
            "block align {block_align} inconsistent with {channels} x {bits}-bit samples"
        )));
    }
    if data.len() % frame_bytes != 0 {
        return Err(Error::Format(format!(
            "data chunk of {} bytes is not a whole number of {frame_bytes}-byte frames",
            data.len()
        )));
    }
    if sample_rate != expected_rate {
        return Err(Error::RateMismatch {
            expected: expected_rate,
            found: sample_rate,
        });
    }

    let decode: fn(&[u8]) -> f64 = match (format_tag, bits) {
        (FORMAT_PCM, 16) => |b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32_768.0,
        (FORMAT_PCM, 24) => |b| {
            let v = i32::from_le_bytes([0, b[0], b[1], b[2]]) >> 8;
            v as f64 / 8_388_608.0
        },
        (FORMAT_PCM, 32) => |b| i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64 / 2_147_483_648.0,
        _ => |b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
    };

    let frames = data.len() / frame_bytes;
    let scale = 1.0 / channels as f64;
    let samples: Vec<f64> = data
        .chunks_exact(frame_bytes)
        .map(|frame| {
            if channels == 1 {
                decode(frame)
            } else {
                frame.chunks_exact(bytes_per_sample).map(decode).sum::<f64>() * scale
            }
        })
        .collect();

    let spec = WavSpec {
        format_tag,
        channels,
        sample_rate,
        bits_per_sample: bits,
        frames,
    };
    Ok((AudioClip::new(samples, sample_rate)?, spec))
}

/// Write a mono clip as 16-bit PCM. Samples are clamped to `[-1, 1]` and
/// rounded to the nearest integer step of 1/32767.
pub fn write_wav_pcm16(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let path = path.as_ref();
    let data_len = clip.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate().to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate() * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in clip.samples() {
        let q = (s.clamp(-1.0, 1.0) * 32_767.0).round() as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcm16_bytes(channels: u16, rate: u32, samples: &[i16]) -> Vec<u8> {
        let spec = hound::WavSpec {
            channels,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut cursor = std::io::Cursor::new(Vec::new());
        {
            let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
            for &s in samples {
                w.write_sample(s).unwrap();
            }
            w.finalize().unwrap();
        }
        cursor.into_inner()
    }

    #[test]
    fn silent_second_decodes_to_zeros() {
        let bytes = pcm16_bytes(1, 16_000, &vec![0; 16_000]);
        let (clip, spec) = decode_wav(&bytes, 16_000).unwrap();
        assert_eq!(clip.len(), 16_000);
        assert_eq!(spec.frames, 16_000);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn symmetric_stereo_averages_to_silence() {
        let interleaved: Vec<i16> = (0..200)
            .map(|i| if i % 2 == 0 { 16_384 } else { -16_384 })
            .collect();
        let (clip, spec) = decode_wav(&pcm16_bytes(2, 16_000, &interleaved), 16_000).unwrap();
        assert_eq!(spec.channels, 2);
        assert_eq!(clip.len(), 100);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn pcm16_matches_independent_decoder() {
        let raw: Vec<i16> = vec![i16::MIN, -1, 0, 1, 12_345, i16::MAX];
        let bytes = pcm16_bytes(1, 16_000, &raw);
        let (clip, _) = decode_wav(&bytes, 16_000).unwrap();
        assert_eq!(clip.samples()[0], -1.0);

        let reader = hound::WavReader::new(std::io::Cursor::new(&bytes)).unwrap();
        let reference: Vec<f64> = reader
            .into_samples::<i16>()
            .map(|s| s.unwrap() as f64 / 32_768.0)
            .collect();
        assert_eq!(clip.samples(), reference.as_slice());
    }

    #[test]
    fn float32_decoded_verbatim() {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut cursor = std::io::Cursor::new(Vec::new());
        {
            let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
            for s in [0.25f32, -0.5, 0.125] {
                w.write_sample(s).unwrap();
            }
            w.finalize().unwrap();
        }
        let (clip, _) = decode_wav(&cursor.into_inner(), 16_000).unwrap();
        assert_eq!(clip.samples(), &[0.25, -0.5, 0.125]);
    }

    #[test]
    fn rate_mismatch_is_an_error() {
        let bytes = pcm16_bytes(1, 22_050, &[0; 10]);
        assert!(matches!(
            decode_wav(&bytes, 16_000),
            Err(Error::RateMismatch {
                expected: 16_000,
                found: 22_050
            })
        ));
    }

    #[test]
    fn unsupported_bit_depth() {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 8,
            sample_format: hound::SampleFormat::Int,
        };
        let mut cursor = std::io::Cursor::new(Vec::new());
        {
            let mut w = hound::WavWriter::new(&mut cursor, spec).unwrap();
            w.write_sample(3i8).unwrap();
            w.finalize().unwrap();
        }
        assert!(matches!(
            decode_wav(&cursor.into_inner(), 16_000),
            Err(Error::UnsupportedEncoding { bits: 8, .. })
        ));
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(decode_wav(b"RIFX", 16_000), Err(Error::Format(_))));
        let mut bytes = pcm16_bytes(1, 16_000, &[1, 2, 3, 4]);
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(decode_wav(&bytes, 16_000), Err(Error::Format(_))));
    }

    #[test]
    fn pcm16_writer_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let clip = AudioClip::new(vec![0.0, 0.5, -0.5, 1.0, -1.0], 16_000).unwrap();
        write_wav_pcm16(&path, &clip).unwrap();
        let reader = hound::WavReader::open(&path).unwrap();
        let ints: Vec<i16> = reader.into_samples::<i16>().map(|s| s.unwrap()).collect();
        assert_eq!(ints, vec![0, 16_384, -16_384, 32_767, -32_767]);
        let back = read_wav(&path, 16_000).unwrap();
        assert_eq!(back.len(), 5);
    }
}
