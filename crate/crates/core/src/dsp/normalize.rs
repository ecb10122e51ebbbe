use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{put_f32s, put_u32, Reader};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Standard deviations below this are clamped before dividing.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    None,
    L1,
    #[serde(alias = "std")]
    Standardize,
}

impl NormMode {
    pub fn tag(self) -> u8 {
        match self {
            NormMode::None => 0,
            NormMode::L1 => 1,
            NormMode::Standardize => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(NormMode::None),
            1 => Some(NormMode::L1),
            2 => Some(NormMode::Standardize),
            _ => None,
        }
    }
}

/// Feature normalization. `L1` scales each matrix by its own absolute sum;
/// `Standardize` uses per-coefficient mean and std fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalizer {
    None,
    L1,
    Standardize {
        rows: usize,
        cols: usize,
        mean: Vec<f64>,
        std: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub matrix: FeatureMatrix,
    /// Set when an L1 input had zero norm and was passed through unchanged.
    pub zero_norm: bool,
}

impl Normalizer {
    pub fn fit(features: &[FeatureMatrix], mode: NormMode) -> Result<Self> {
        match mode {
            NormMode::None => Ok(Normalizer::None),
            NormMode::L1 => Ok(Normalizer::L1),
            NormMode::Standardize => {
                let first = features
                    .first()
                    .ok_or(Error::EmptyInput("standardization needs a fitting set"))?;
                let (rows, cols) = first.shape();
                if let Some(bad) = features.iter().find(|f| f.shape() != (rows, cols)) {
                    return Err(Error::Shape(format!(
                        "fitting set mixes {rows}x{cols} with {}x{}",
                        bad.rows(),
                        bad.cols()
                    )));
                }
                let n = features.len() as f64;
                let mut mean = vec![0.0; rows * cols];
                for f in features {
                    for (m, v) in mean.iter_mut().zip(f.values()) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                let mut var = vec![0.0; rows * cols];
                for f in features {
                    for ((s, v), m) in var.iter_mut().zip(f.values()).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
                Ok(Normalizer::Standardize {
                    rows,
                    cols,
                    mean,
                    std,
                })
            }
        }
    }

    pub fn mode(&self) -> NormMode {
        match self {
            Normalizer::None => NormMode::None,
            Normalizer::L1 => NormMode::L1,
            Normalizer::Standardize { .. } => NormMode::Standardize,
        }
    }

    pub fn apply(&self, feature: &FeatureMatrix) -> Result<Normalized> {
        match self {
            Normalizer::None => Ok(Normalized {
                matrix: feature.clone(),
                zero_norm: false,
            }),
            Normalizer::L1 => {
                let norm = feature.abs_sum();
                if norm == 0.0 {
                    return Ok(Normalized {
                        matrix: feature.clone(),
                        zero_norm: true,
                    });
                }
                let mut out = feature.clone();
                out.values_mut().iter_mut().for_each(|v| *v /= norm);
                Ok(Normalized {
                    matrix: out,
                    zero_norm: false,
                })
            }
            Normalizer::Standardize {
                rows,
                cols,
                mean,
                std,
            } => {
                if feature.shape() != (*rows, *cols) {
                    return Err(Error::Shape(format!(
                        "normalizer fitted on {rows}x{cols}, got {}x{}",
                        feature.rows(),
                        feature.cols()
                    )));
                }
                let mut out = feature.clone();
                for ((v, m), s) in out.values_mut().iter_mut().zip(mean).zip(std) {
                    *v = (*v - m) / s;
                }
                Ok(Normalized {
                    matrix: out,
                    zero_norm: false,
                })
            }
        }
    }

    /// Round the fitted statistics to single precision so a serialized copy
    /// behaves identically.
    pub fn to_single_precision(&self) -> Self {
        match self {
            Normalizer::Standardize {
                rows,
                cols,
                mean,
                std,
            } => Normalizer::Standardize {
                rows: *rows,
                cols: *cols,
                mean: mean.iter().map(|&v| v as f32 as f64).collect(),
                std: std
                    .iter()
                    .map(|&v| (v as f32 as f64).max(STD_FLOOR as f32 as f64))
                    .collect(),
            },
            other => other.clone(),
        }
    }
}

pub fn fit_normalizer(features: &[FeatureMatrix], mode: NormMode) -> Result<Normalizer> {
    Normalizer::fit(features, mode)
}

pub fn apply_normalizer(norm: &Normalizer, feature: &FeatureMatrix) -> Result<Normalized> {
    norm.apply(feature)
}

pub const NORMALIZER_MAGIC: &[u8; 4] = b"GMN1";

/// `GMN1` container: magic, mode tag (u8), and for standardization rows,
/// cols (u32 LE) followed by the mean then std grids as binary32.
pub fn encode_normalizer(norm: &Normalizer) -> Result<Vec<u8>> {
    let mut out = NORMALIZER_MAGIC.to_vec();
    out.push(norm.mode().tag());
    if let Normalizer::Standardize {
        rows,
        cols,
        mean,
        std,
    } = norm
    {
        put_u32(&mut out, "normalizer", *rows)?;
        put_u32(&mut out, "normalizer", *cols)?;
        put_f32s(&mut out, mean)?;
        put_f32s(&mut out, std)?;
    }
    Ok(out)
}

pub(crate) fn read_normalizer_from(r: &mut Reader<'_>) -> Result<Normalizer> {
    r.magic(NORMALIZER_MAGIC)?;
    let tag = r.u8()?;
    match NormMode::from_tag(tag) {
        Some(NormMode::None) => Ok(Normalizer::None),
        Some(NormMode::L1) => Ok(Normalizer::L1),
        Some(NormMode::Standardize) => {
            let rows = r.u32()?;
            let cols = r.u32()?;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::bad_file("normalizer", "dimensions overflow"))?;
            let mean = r.f32s(n)?;
            let std = r.f32s(n)?;
            if std.iter().any(|&s| s <= 0.0) {
                return Err(Error::bad_file("normalizer", "non-positive std"));
            }
            Ok(Normalizer::Standardize {
                rows,
                cols,
                mean,
                std,
            })
        }
        None => Err(Error::bad_file("normalizer", format!("unknown mode tag {tag}"))),
    }
}

pub fn decode_normalizer(bytes: &[u8]) -> Result<Normalizer> {
    let mut r = Reader::new(bytes, "normalizer");
    let norm = read_normalizer_from(&mut r)?;
    r.finish()?;
    Ok(norm)
}

pub fn write_normalizer(norm: &Normalizer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_normalizer(norm)?).map_err(|e| Error::io(path, e))
}

pub fn read_normalizer(path: impl AsRef<Path>) -> Result<Normalizer> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_normalizer(&bytes)
}
