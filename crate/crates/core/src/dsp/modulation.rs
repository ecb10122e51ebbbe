//! Cepstral and spectro-temporal modulation features built on the log-Mel grid.

use serde::{Deserialize, Serialize};

use super::dct::{dct2_2d_in_place, DctPlan};
use crate::error::{Error, Result};
use crate::matrix::{FeatureKind, FeatureMatrix};

fn require_log_mel(m: &FeatureMatrix, op: &str) -> Result<()> {
    if m.kind() != FeatureKind::LogMel {
        return Err(Error::InvalidConfig(format!(
            "{op} expects a log-Mel matrix, got {:?}",
            m.kind()
        )));
    }
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::EmptyInput("empty log-Mel matrix"));
    }
    Ok(())
}

fn dct2_of(m: &FeatureMatrix, kind: FeatureKind) -> FeatureMatrix {
    let (rows, cols) = m.shape();
    let mut values = m.values().to_vec();
    dct2_2d_in_place(&mut values, rows, cols);
    FeatureMatrix::from_raw(rows, cols, values, kind)
}

/// Global 2-D DCT of a whole log-Mel matrix. Output row `i` is spectral
/// modulation `i`, column `j` temporal modulation `j`.
pub fn dct2_forward(logmel: &FeatureMatrix) -> Result<FeatureMatrix> {
    require_log_mel(logmel, "dct2_forward")?;
    Ok(dct2_of(logmel, FeatureKind::GlobalMod))
}

/// Per-frame cepstra: a DCT over the mel axis of every column, truncated to
/// `n_coeffs` rows.
pub fn mfcc(logmel: &FeatureMatrix, n_coeffs: usize) -> Result<FeatureMatrix> {
    require_log_mel(logmel, "mfcc")?;
    let (n_mels, frames) = logmel.shape();
    if n_coeffs == 0 || n_coeffs > n_mels {
        return Err(Error::InvalidConfig(format!(
            "n_coeffs must be in 1..={n_mels}, got {n_coeffs}"
        )));
    }
    let mut plan = DctPlan::new(n_mels);
    let mut column = vec![0.0; n_mels];
    let mut coeffs = vec![0.0; n_mels];
    let mut out = vec![0.0; n_coeffs * frames];
    for f in 0..frames {
        for (m, slot) in column.iter_mut().enumerate() {
            *slot = logmel.get(m, f);
        }
        plan.forward(&column, &mut coeffs);
        for c in 0..n_coeffs {
            out[c * frames + f] = coeffs[c];
        }
    }
    Ok(FeatureMatrix::from_raw(n_coeffs, frames, out, FeatureKind::Mfcc))
}

/// Split `len` into `parts` runs of `len / parts`, the last taking the remainder.
fn split_even(len: usize, parts: usize) -> Vec<(usize, usize)> {
    let base = len / parts;
    (0..parts)
        .map(|i| {
            let start = i * base;
            let size = if i + 1 == parts { len - start } else { base };
            (start, size)
        })
        .collect()
}

/// 2-D DCT computed independently inside each cell of a `grid_rows x grid_cols`
/// partition, reassembled in place.
pub fn blocked_modulation(
    logmel: &FeatureMatrix,
    grid_rows: usize,
    grid_cols: usize,
) -> Result<FeatureMatrix> {
    require_log_mel(logmel, "blocked_modulation")?;
    let (rows, cols) = logmel.shape();
    if grid_rows == 0 || grid_cols == 0 || grid_rows > rows || grid_cols > cols {
        return Err(Error::InvalidConfig(format!(
            "grid {grid_rows}x{grid_cols} does not fit a {rows}x{cols} matrix"
        )));
    }
    let mut out = FeatureMatrix::zeros(rows, cols, FeatureKind::BlockedMod);
    for &(r0, nr) in &split_even(rows, grid_rows) {
        for &(c0, nc) in &split_even(cols, grid_cols) {
            let block = dct2_of(&logmel.block(r0, nr, c0, nc), FeatureKind::BlockedMod);
            for r in 0..nr {
                for c in 0..nc {
                    out.set(r0 + r, c0 + c, block.get(r, c));
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    LowHalf,
    HighHalf,
}

impl Band {
    /// Row range of this half. With an odd mel count the middle row goes high.
    pub fn rows(self, n_mels: usize) -> (usize, usize) {
        let split = n_mels / 2;
        match self {
            Band::LowHalf => (0, split),
            Band::HighHalf => (split, n_mels - split),
        }
    }
}

/// 2-D DCT of the low or high half of the mel axis.
pub fn band_restricted_modulation(logmel: &FeatureMatrix, band: Band) -> Result<FeatureMatrix> {
    require_log_mel(logmel, "band_restricted_modulation")?;
    if logmel.rows() < 2 {
        return Err(Error::InvalidConfig(
            "band restriction needs at least 2 mel rows".into(),
        ));
    }
    let (r0, nr) = band.rows(logmel.rows());
    Ok(dct2_of(
        &logmel.block(r0, nr, 0, logmel.cols()),
        FeatureKind::BandMod,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    fn random_log_mel(rows: usize, cols: usize, seed: u64) -> FeatureMatrix {
        let mut rng = rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64(seed);
        let v = (0..rows * cols).map(|_| rng.random_range(-5.0..5.0)).collect();
        FeatureMatrix::new(rows, cols, v, FeatureKind::LogMel).unwrap()
    }

    /// Quadruple-sum 2-D DCT-II.
    fn brute_dct2(m: &FeatureMatrix) -> Vec<f64> {
        let (r, c) = m.shape();
        let s = |k: usize, n: usize| {
            if k == 0 {
                (1.0 / n as f64).sqrt()
            } else {
                (2.0 / n as f64).sqrt()
            }
        };
        let mut out = vec![0.0; r * c];
        for p in 0..r {
            for q in 0..c {
                let mut acc = 0.0;
                for i in 0..r {
                    for j in 0..c {
                        acc += m.get(i, j)
                            * (PI * (2 * i + 1) as f64 * p as f64 / (2 * r) as f64).cos()
                            * (PI * (2 * j + 1) as f64 * q as f64 / (2 * c) as f64).cos();
                    }
                }
                out[p * c + q] = s(p, r) * s(q, c) * acc;
            }
        }
        out
    }

    #[test]
    fn constant_matrix_concentrates_at_dc() {
        let m = FeatureMatrix::new(6, 10, vec![-2.5; 60], FeatureKind::LogMel).unwrap();
        let d = dct2_forward(&m).unwrap();
        assert_eq!(d.kind(), FeatureKind::GlobalMod);
        assert!((d.get(0, 0) - (-2.5 * 60f64.sqrt())).abs() < 1e-12);
        assert!(d.values()[1..].iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn random_8x8_matches_brute_force() {
        let m = random_log_mel(8, 8, 1);
        let fast = dct2_forward(&m).unwrap();
        for (a, b) in fast.values().iter().zip(brute_dct2(&m)) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_wrong_kind() {
        let m = FeatureMatrix::zeros(2, 2, FeatureKind::PowerSpec);
        assert!(dct2_forward(&m).is_err());
    }

    #[test]
    fn mfcc_of_constant_column() {
        let m = FeatureMatrix::new(4, 3, vec![1.5; 12], FeatureKind::LogMel).unwrap();
        let c = mfcc(&m, 2).unwrap();
        assert_eq!(c.shape(), (2, 3));
        for f in 0..3 {
            assert!((c.get(0, f) - 3.0).abs() < 1e-12);
            assert!(c.get(1, f).abs() < 1e-12);
        }
        assert!(mfcc(&m, 5).is_err());
    }

    #[test]
    fn mfcc_matches_columnwise_dct_and_dc_identity() {
        let m = random_log_mel(20, 7, 9);
        let c = mfcc(&m, 13).unwrap();
        for f in 0..7 {
            let column: Vec<f64> = (0..20).map(|r| m.get(r, f)).collect();
            let reference = super::super::dct::dct2_1d(&column, Some(13)).unwrap();
            for k in 0..13 {
                assert!((c.get(k, f) - reference[k]).abs() < 1e-12);
            }
            let dc = column.iter().sum::<f64>() * (1.0 / 20f64).sqrt();
            assert!((c.get(0, f) - dc).abs() < 1e-12);
        }
    }

    #[test]
    fn blocked_unit_grid_equals_global() {
        let m = random_log_mel(9, 14, 4);
        let a = blocked_modulation(&m, 1, 1).unwrap();
        let b = dct2_forward(&m).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn blocked_constant_has_one_dc_per_block() {
        let m = FeatureMatrix::new(8, 8, vec![3.0; 64], FeatureKind::LogMel).unwrap();
        let b = blocked_modulation(&m, 2, 2).unwrap();
        let nonzero: Vec<(usize, usize)> = (0..8)
            .flat_map(|r| (0..8).map(move |c| (r, c)))
            .filter(|&(r, c)| b.get(r, c).abs() > 1e-9)
            .collect();
        assert_eq!(nonzero, vec![(0, 0), (0, 4), (4, 0), (4, 4)]);
    }

    #[test]
    fn blocked_blocks_match_brute_force() {
        let m = random_log_mel(8, 8, 2);
        let b = blocked_modulation(&m, 2, 2).unwrap();
        for (r0, c0) in [(0, 0), (0, 4), (4, 0), (4, 4)] {
            let oracle = brute_dct2(&m.block(r0, 4, c0, 4));
            for r in 0..4 {
                for c in 0..4 {
                    assert!((b.get(r0 + r, c0 + c) - oracle[r * 4 + c]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn blocked_remainder_goes_to_last_block() {
        assert_eq!(split_even(10, 3), vec![(0, 3), (3, 3), (6, 4)]);
        let m = random_log_mel(5, 7, 6);
        let b = blocked_modulation(&m, 2, 2).unwrap();
        let oracle = brute_dct2(&m.block(2, 3, 3, 4));
        assert!((b.get(2, 3) - oracle[0]).abs() < 1e-9);
        assert!(blocked_modulation(&m, 6, 1).is_err());
        assert!(blocked_modulation(&m, 0, 1).is_err());
    }

    #[test]
    fn band_halves() {
        let m = random_log_mel(4, 6, 8);
        let low = band_restricted_modulation(&m, Band::LowHalf).unwrap();
        assert_eq!(low.shape(), (2, 6));
        assert_eq!(low.kind(), FeatureKind::BandMod);
        let oracle = brute_dct2(&m.block(0, 2, 0, 6));
        for (a, b) in low.values().iter().zip(oracle) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(Band::LowHalf.rows(5), (0, 2));
        assert_eq!(Band::HighHalf.rows(5), (2, 3));
    }

    #[test]
    fn constant_band_is_single_dc() {
        let mut v = vec![1.0; 24];
        v[12..].fill(-4.0);
        let m = FeatureMatrix::new(4, 6, v, FeatureKind::LogMel).unwrap();
        let high = band_restricted_modulation(&m, Band::HighHalf).unwrap();
        assert!((high.get(0, 0) + 4.0 * 12f64.sqrt()).abs() < 1e-12);
        assert!(high.values()[1..].iter().all(|x| x.abs() < 1e-12));
    }

    fn modulation_argmax(rows: usize, cols: usize, period: f64, phase: f64, tilt: f64) -> usize {
        let v = (0..rows)
            .flat_map(|r| {
                (0..cols).map(move |j| tilt * r as f64 / rows as f64 + (2.0 * PI * (j as f64 + phase) / period).cos())
            })
            .collect();
        let g = dct2_forward(&FeatureMatrix::new(rows, cols, v, FeatureKind::LogMel).unwrap()).unwrap();
        let energy = |c: usize| (0..rows).map(|r| g.get(r, c).powi(2)).sum::<f64>();
        (1..cols).max_by(|&a, &b| energy(a).total_cmp(&energy(b))).unwrap()
    }

    proptest::proptest! {
        // Column k has period 2 * cols / k frames.
        #[test]
        fn centred_modulation_peaks_at_nearest_column(period in 4.0f64..80.0, tilt in -4.0f64..4.0) {
            let k = 2.0 * 300.0 / period;
            proptest::prop_assume!((k.fract() - 0.5).abs() > 0.05);
            proptest::prop_assert_eq!(modulation_argmax(40, 300, period, 0.5, tilt), k.round() as usize);
        }
    }
}
