//! Row-major real feature grids.

use crate::error::{Error, Result};

/// What a [`FeatureMatrix`] holds. Rows index frequency (or spectral
/// modulation), columns index frames (or temporal modulation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    PowerSpec,
    MelSpec,
    LogMel,
    Mfcc,
    GlobalMod,
    BlockedMod,
    BandMod,
}

impl FeatureKind {
    pub fn tag(self) -> u8 {
        match self {
            FeatureKind::PowerSpec => 0,
            FeatureKind::MelSpec => 1,
            FeatureKind::LogMel => 2,
            FeatureKind::Mfcc => 3,
            FeatureKind::GlobalMod => 4,
            FeatureKind::BlockedMod => 5,
            FeatureKind::BandMod => 6,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => FeatureKind::PowerSpec,
            1 => FeatureKind::MelSpec,
            2 => FeatureKind::LogMel,
            3 => FeatureKind::Mfcc,
            4 => FeatureKind::GlobalMod,
            5 => FeatureKind::BlockedMod,
            6 => FeatureKind::BandMod,
            _ => return None,
        })
    }

    /// Kinds living in the 2-D DCT (modulation) domain.
    pub fn is_modulation(self) -> bool {
        matches!(
            self,
            FeatureKind::GlobalMod | FeatureKind::BlockedMod | FeatureKind::BandMod
        )
    }

    fn is_nonnegative(self) -> bool {
        matches!(self, FeatureKind::PowerSpec | FeatureKind::MelSpec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, kind: FeatureKind) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "matrix entry ({}, {})",
                i / cols.max(1),
                i % cols.max(1)
            )));
        }
        if kind.is_nonnegative() {
            if let Some(i) = values.iter().position(|&v| v < 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{kind:?} entry {i} is negative"
                )));
            }
        }
        Ok(Self {
            rows,
            cols,
            values,
            kind,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], kind: FeatureKind) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat(), kind)
    }

    pub fn zeros(rows: usize, cols: usize, kind: FeatureKind) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
            kind,
        }
    }

    /// Constructor for values produced internally from finite inputs.
    pub(crate) fn from_raw(rows: usize, cols: usize, values: Vec<f64>, kind: FeatureKind) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        Self {
            rows,
            cols,
            values,
            kind,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub(crate) fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub(crate) fn with_kind(mut self, kind: FeatureKind) -> Self {
        self.kind = kind;
        self
    }

    /// Copy of the sub-block `[r0, r0+nr) x [c0, c0+nc)`.
    pub fn block(&self, r0: usize, nr: usize, c0: usize, nc: usize) -> FeatureMatrix {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols);
        let mut values = Vec::with_capacity(nr * nc);
        for r in r0..r0 + nr {
            values.extend_from_slice(&self.row(r)[c0..c0 + nc]);
        }
        FeatureMatrix::from_raw(nr, nc, values, self.kind)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn abs_sum(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            0.0
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }
}
