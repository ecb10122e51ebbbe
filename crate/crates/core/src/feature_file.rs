//! The `GMF1` binary feature container.
//!
//! Layout: magic `GMF1`, rows (u32 LE), cols (u32 LE), kind tag (u8), then
//! rows*cols IEEE-754 binary32 values, little-endian, row-major. Values are
//! stored at single precision, so a matrix whose entries are already
//! representable as `f32` round-trips bit-exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{FeatureKind, FeatureMatrix};

pub const FEATURE_MAGIC: &[u8; 4] = b"GMF1";
const HEADER_LEN: usize = 13;

pub fn encode_feature(matrix: &FeatureMatrix) -> Result<Vec<u8>> {
    let (rows, cols) = matrix.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::bad_file(
            "feature",
            format!("refusing to write a degenerate {rows}x{cols} matrix"),
        ));
    }
    let rows32 = u32::try_from(rows).map_err(|_| Error::bad_file("feature", "too many rows"))?;
    let cols32 = u32::try_from(cols).map_err(|_| Error::bad_file("feature", "too many columns"))?;

    let mut out = Vec::with_capacity(HEADER_LEN + rows * cols * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&rows32.to_le_bytes());
    out.extend_from_slice(&cols32.to_le_bytes());
    out.push(matrix.kind().tag());
    for &v in matrix.values() {
        let single = v as f32;
        if !single.is_finite() {
            return Err(Error::NonFinite(format!("{v} overflows binary32")));
        }
        out.extend_from_slice(&single.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_feature(bytes: &[u8]) -> Result<FeatureMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::bad_file("feature", "truncated header"));
    }
    if &bytes[0..4] != FEATURE_MAGIC {
        return Err(Error::bad_file("feature", "bad magic, expected GMF1"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let kind = FeatureKind::from_tag(bytes[12])
        .ok_or_else(|| Error::bad_file("feature", format!("unknown kind tag {}", bytes[12])))?;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::bad_file("feature", "dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::bad_file(
            "feature",
            format!(
                "payload is {} bytes, header promises {expected}",
                payload.len()
            ),
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    FeatureMatrix::new(rows, cols, values, kind)
}

pub fn write_feature(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_feature(matrix)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_feature(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature(&bytes)
}
