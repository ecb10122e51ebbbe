//! Orthonormal DCT-II (and its inverse) computed through a length-2N FFT.
//!
//! `X_k = s_k * sum_n x_n cos(pi (2n+1) k / 2N)`, `s_0 = sqrt(1/N)`,
//! `s_k = sqrt(2/N)` otherwise.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Precomputed FFTs and twiddles for length-`n` transforms.
pub struct DctPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `s_k * exp(-i pi k / 2N) / 2`
    twiddles: Vec<Complex64>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl DctPlan {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "DCT length must be positive");
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(2 * n);
        let inverse = planner.plan_fft_inverse(2 * n);
        let twiddles = (0..n)
            .map(|k| {
                let ang = -PI * k as f64 / (2 * n) as f64;
                Complex64::from_polar(0.5 * scale(k, n), ang)
            })
            .collect();
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            twiddles,
            buf: vec![Complex64::default(); 2 * n],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Forward transform of `input` into `output` (both length `n`).
    pub fn forward(&mut self, input: &[f64], output: &mut [f64]) {
        let n = self.n;
        assert_eq!(input.len(), n);
        assert_eq!(output.len(), n);
        // Even symmetric extension: [x_0 .. x_{n-1}, x_{n-1} .. x_0].
        for (i, &x) in input.iter().enumerate() {
            self.buf[i] = Complex64::new(x, 0.0);
            self.buf[2 * n - 1 - i] = Complex64::new(x, 0.0);
        }
        self.forward
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for ((o, y), t) in output.iter_mut().zip(&self.buf).zip(&self.twiddles) {
            *o = (y * t).re;
        }
    }

    /// Inverse (orthonormal DCT-III): `x_n = sum_k s_k X_k cos(pi (2n+1) k / 2N)`.
    pub fn inverse(&mut self, input: &[f64], output: &mut [f64]) {
        let n = self.n;
        assert_eq!(input.len(), n);
        assert_eq!(output.len(), n);
        for (k, &x) in input.iter().enumerate() {
            let ang = PI * k as f64 / (2 * n) as f64;
            self.buf[k] = Complex64::from_polar(scale(k, n) * x, ang);
        }
        self.buf[n..].fill(Complex64::default());
        self.inverse
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for (o, y) in output.iter_mut().zip(&self.buf) {
            *o = y.re;
        }
    }
}

fn scale(k: usize, n: usize) -> f64 {
    if k == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

/// Orthonormal DCT-II, optionally keeping only the first `n_out` coefficients.
pub fn dct2_1d(input: &[f64], n_out: Option<usize>) -> Result<Vec<f64>> {
    if input.is_empty() {
        return Err(Error::EmptyInput("DCT of an empty vector"));
    }
    let keep = n_out.unwrap_or(input.len());
    if keep > input.len() {
        return Err(Error::InvalidConfig(format!(
            "requested {keep} coefficients from a length-{} transform",
            input.len()
        )));
    }
    let mut out = vec![0.0; input.len()];
    DctPlan::new(input.len()).forward(input, &mut out);
    out.truncate(keep);
    Ok(out)
}

/// Inverse of [`dct2_1d`] (orthonormal DCT-III).
pub fn idct2_1d(input: &[f64]) -> Result<Vec<f64>> {
    if input.is_empty() {
        return Err(Error::EmptyInput("inverse DCT of an empty vector"));
    }
    let mut out = vec![0.0; input.len()];
    DctPlan::new(input.len()).inverse(input, &mut out);
    Ok(out)
}

/// Separable 2-D DCT-II in place over a row-major `rows x cols` grid:
/// every row first, then every column.
pub(crate) fn dct2_2d_in_place(values: &mut [f64], rows: usize, cols: usize) {
    debug_assert_eq!(values.len(), rows * cols);
    if rows == 0 || cols == 0 {
        return;
    }
    let mut row_plan = DctPlan::new(cols);
    let mut tmp = vec![0.0; cols.max(rows)];
    for r in 0..rows {
        let row = &mut values[r * cols..(r + 1) * cols];
        row_plan.forward(row, &mut tmp[..cols]);
        row.copy_from_slice(&tmp[..cols]);
    }
    let mut col_plan = DctPlan::new(rows);
    let mut column = vec![0.0; rows];
    for c in 0..cols {
        for r in 0..rows {
            column[r] = values[r * cols + c];
        }
        col_plan.forward(&column, &mut tmp[..rows]);
        for r in 0..rows {
            values[r * cols + c] = tmp[r];
        }
    }
}
