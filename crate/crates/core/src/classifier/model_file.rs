//! The `GMM1` model container.
//!
//! Layout (little-endian): magic `GMM1`, version (u32), feature kind tag
//! (u8), feature rows and cols (u32), reduction tag (u8) with its two u32
//! arguments, input and hidden widths (u32), the embedded `GMN1` normalizer
//! prefixed by its byte length (u32), the parameters `w1, b1, w2, b2` as
//! binary32, and a CRC-32 of everything before it.

use std::fs;
use std::path::Path;

use super::{Mlp, MlpModel, Reduction};
use crate::codec::{put_f32s, put_u32, Reader};
use crate::dsp::normalize::{encode_normalizer, read_normalizer_from};
use crate::error::{Error, Result};
use crate::matrix::FeatureKind;

pub const MODEL_MAGIC: &[u8; 4] = b"GMM1";
pub const MODEL_VERSION: u32 = 1;

const WHAT: &str = "model";

pub fn encode_model(model: &MlpModel) -> Result<Vec<u8>> {
    let mut out = MODEL_MAGIC.to_vec();
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.push(model.feature_kind.tag());
    put_u32(&mut out, WHAT, model.feature_shape.0)?;
    put_u32(&mut out, WHAT, model.feature_shape.1)?;
    out.push(model.reduction.tag());
    let (a, b) = match model.reduction {
        Reduction::FlattenTopK { rows, cols } => (rows, cols),
        Reduction::MeanOverTime => (0, 0),
    };
    put_u32(&mut out, WHAT, a)?;
    put_u32(&mut out, WHAT, b)?;
    put_u32(&mut out, WHAT, model.network.input_dim())?;
    put_u32(&mut out, WHAT, model.network.hidden())?;
    let norm = encode_normalizer(&model.normalizer)?;
    put_u32(&mut out, WHAT, norm.len())?;
    out.extend_from_slice(&norm);
    put_f32s(&mut out, &model.network.parameters())?;
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<MlpModel> {
    if bytes.len() < 8 {
        return Err(Error::bad_file(WHAT, "truncated"));
    }
    let (body, crc) = bytes.split_at(bytes.len() - 4);
    let mut r = Reader::new(body, WHAT);
    r.magic(MODEL_MAGIC)?;
    let version = r.u32()?;
    if version != MODEL_VERSION as usize {
        return Err(Error::bad_file(
            WHAT,
            format!("unsupported version {version}, expected {MODEL_VERSION}"),
        ));
    }
    if crc32fast::hash(body).to_le_bytes() != crc {
        return Err(Error::bad_file(WHAT, "checksum mismatch"));
    }
    let kind_tag = r.u8()?;
    let feature_kind = FeatureKind::from_tag(kind_tag)
        .ok_or_else(|| Error::bad_file(WHAT, format!("unknown feature kind {kind_tag}")))?;
    let feature_shape = (r.u32()?, r.u32()?);
    let reduction = match (r.u8()?, r.u32()?, r.u32()?) {
        (0, rows, cols) if rows > 0 && cols > 0 => Reduction::FlattenTopK { rows, cols },
        (1, _, _) => Reduction::MeanOverTime,
        (tag, ..) => return Err(Error::bad_file(WHAT, format!("bad reduction tag {tag}"))),
    };
    let input_dim = r.u32()?;
    let hidden = r.u32()?;
    if input_dim != reduction.output_dim(feature_shape.0) || hidden == 0 {
        return Err(Error::bad_file(WHAT, "inconsistent network dimensions"));
    }
    let norm_len = r.u32()?;
    let norm_start = r.position();
    let normalizer = read_normalizer_from(&mut r)?;
    if r.position() - norm_start != norm_len {
        return Err(Error::bad_file(WHAT, "normalizer length mismatch"));
    }
    let n_params = hidden
        .checked_mul(input_dim)
        .and_then(|n| n.checked_add(3 * hidden + 2))
        .ok_or_else(|| Error::bad_file(WHAT, "dimensions overflow"))?;
    let params = r.f32s(n_params)?;
    r.finish()?;
    let mut network = Mlp::zeros(input_dim, hidden);
    network.set_parameters(&params)?;
    Ok(MlpModel {
        feature_kind,
        feature_shape,
        reduction,
        normalizer,
        network,
    })
}

pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_model(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::rng_from_seed;
    use crate::dsp::{NormMode, Normalizer};
    use crate::matrix::FeatureMatrix;

    fn model(norm: Normalizer) -> MlpModel {
        MlpModel {
            feature_kind: FeatureKind::GlobalMod,
            feature_shape: (4, 5),
            reduction: Reduction::FlattenTopK { rows: 2, cols: 3 },
            normalizer: norm,
            network: Mlp::glorot(6, 3, &mut rng_from_seed(2)).unwrap(),
        }
    }

    fn std_norm() -> Normalizer {
        let feats: Vec<FeatureMatrix> = (0..4)
            .map(|i| {
                let v = (0..20).map(|j| ((i * 7 + j * 3) % 11) as f64 - 5.0).collect();
                FeatureMatrix::new(4, 5, v, FeatureKind::GlobalMod).unwrap()
            })
            .collect();
        Normalizer::fit(&feats, NormMode::Standardize).unwrap().to_single_precision()
    }

    #[test]
    fn round_trip_is_bitwise() {
        for norm in [Normalizer::None, Normalizer::L1, std_norm()] {
            let m = model(norm);
            let back = decode_model(&encode_model(&m).unwrap()).unwrap();
            assert_eq!(back, m);
            let f = FeatureMatrix::new(4, 5, (0..20).map(|i| i as f64 * 0.25).collect(), FeatureKind::GlobalMod)
                .unwrap();
            assert_eq!(back.score(&f).unwrap().to_bits(), m.score(&f).unwrap().to_bits());
        }
    }

    #[test]
    fn corruption_and_version_rejected() {
        let bytes = encode_model(&model(std_norm())).unwrap();
        let mut flipped = bytes.clone();
        let mid = flipped.len() / 2;
        flipped[mid] ^= 0x10;
        assert!(matches!(decode_model(&flipped), Err(Error::BadFile { .. })));
        assert!(decode_model(&bytes[..bytes.len() - 3]).is_err());
        let mut v2 = bytes.clone();
        v2[4] = 2;
        let err = decode_model(&v2).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(decode_model(&magic).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gmm");
        let m = model(Normalizer::L1);
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
    }
}
