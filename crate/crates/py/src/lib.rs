//! Python bindings for the modspoof core.
//!
//! Matrices cross the boundary as lists of rows, score lists as plain float
//! lists. Errors raise `modspoof.ModspoofError`.

use std::str::FromStr;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use modspoof_core::audio::{fix_duration_with_offset, read_wav as core_read_wav, AudioClip};
use modspoof_core::classifier::{load_model, MlpModel};
use modspoof_core::dsp::{
    dct2_forward, FeatureExtractor, FeatureSpec, MelConfig, StftConfig,
};
use modspoof_core::eval::{eer_from_scores, min_tdcf_from_scores, AsvOperatingPoint, CostModel, FusionMode};
use modspoof_core::matrix::{FeatureKind, FeatureMatrix};

create_exception!(modspoof, ModspoofError, PyException);

fn py_err(e: impl std::fmt::Display) -> PyErr {
    ModspoofError::new_err(e.to_string())
}

fn clip(samples: Vec<f64>, sample_rate: u32) -> PyResult<AudioClip> {
    AudioClip::new(samples, sample_rate).map_err(py_err)
}

fn extractor(sample_rate: u32) -> PyResult<FeatureExtractor> {
    let mel = MelConfig {
        sample_rate,
        ..MelConfig::default()
    };
    FeatureExtractor::new(StftConfig::default(), mel).map_err(py_err)
}

fn matrix(rows: &[Vec<f64>], kind: FeatureKind) -> PyResult<FeatureMatrix> {
    FeatureMatrix::from_rows(rows, kind).map_err(py_err)
}

/// Read a PCM WAV file; returns `(samples, sample_rate)`.
#[pyfunction]
#[pyo3(signature = (path, sample_rate=16000))]
fn read_wav(path: &str, sample_rate: u32) -> PyResult<(Vec<f64>, u32)> {
    let c = core_read_wav(path, sample_rate).map_err(py_err)?;
    let sr = c.sample_rate();
    Ok((c.into_samples(), sr))
}

/// Cut or zero-pad to `seconds`, starting `offset` seconds in.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate=16000, seconds=4.0, offset=0.0))]
fn fix_duration(samples: Vec<f64>, sample_rate: u32, seconds: f64, offset: f64) -> PyResult<Vec<f64>> {
    let c = fix_duration_with_offset(&clip(samples, sample_rate)?, seconds, offset).map_err(py_err)?;
    Ok(c.into_samples())
}

/// Log-Mel spectrogram with the default analysis settings, `n_mels` rows.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate=16000))]
fn log_mel(samples: Vec<f64>, sample_rate: u32) -> PyResult<Vec<Vec<f64>>> {
    let m = extractor(sample_rate)?
        .log_mel(&clip(samples, sample_rate)?)
        .map_err(py_err)?;
    Ok(m.to_rows())
}

/// Any supported feature by name, e.g. `"global-mod"` or `"blocked-mod:2x2"`.
#[pyfunction]
#[pyo3(signature = (samples, feature="global-mod", sample_rate=16000))]
fn extract(samples: Vec<f64>, feature: &str, sample_rate: u32) -> PyResult<Vec<Vec<f64>>> {
    let spec = FeatureSpec::from_str(feature).map_err(py_err)?;
    let m = extractor(sample_rate)?
        .extract(&clip(samples, sample_rate)?, spec)
        .map_err(py_err)?;
    Ok(m.to_rows())
}

/// Global modulation feature (unnormalized) of a clip.
#[pyfunction]
#[pyo3(signature = (samples, sample_rate=16000))]
fn global_modulation(samples: Vec<f64>, sample_rate: u32) -> PyResult<Vec<Vec<f64>>> {
    extract(samples, "global-mod", sample_rate)
}

/// Orthonormal 2-D DCT-II of a matrix given as rows.
#[pyfunction]
fn dct2(rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let m = dct2_forward(&matrix(&rows, FeatureKind::LogMel)?).map_err(py_err)?;
    Ok(m.to_rows())
}

/// `(eer, threshold)` from bonafide and spoof scores.
#[pyfunction]
fn eer(bonafide: Vec<f64>, spoof: Vec<f64>) -> PyResult<(f64, f64)> {
    eer_from_scores(&bonafide, &spoof).map_err(py_err)
}

/// `(normalized min t-DCF, threshold)` with the default cost model.
#[pyfunction]
#[pyo3(signature = (bonafide, spoof, p_miss_asv, p_fa_asv, p_miss_spoof_asv))]
fn min_tdcf(
    bonafide: Vec<f64>,
    spoof: Vec<f64>,
    p_miss_asv: f64,
    p_fa_asv: f64,
    p_miss_spoof_asv: f64,
) -> PyResult<(f64, f64)> {
    let op = AsvOperatingPoint::new(p_miss_asv, p_fa_asv, p_miss_spoof_asv).map_err(py_err)?;
    min_tdcf_from_scores(&bonafide, &spoof, &op, &CostModel::default()).map_err(py_err)
}

/// Elementwise fusion of two aligned score lists; `mode` as on the command line.
#[pyfunction]
fn fuse(a: Vec<f64>, b: Vec<f64>, mode: &str) -> PyResult<Vec<f64>> {
    let mode = FusionMode::from_str(mode).map_err(py_err)?;
    mode.validate().map_err(py_err)?;
    if a.len() != b.len() {
        return Err(py_err(format!("score lists differ in length: {} vs {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(&b).map(|(&x, &y)| mode.combine(x, y)).collect())
}

/// A trained model loaded from a `GMM1` file.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: MlpModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_model(path).map_err(py_err)?,
        })
    }

    /// `(rows, cols)` the model expects.
    #[getter]
    fn feature_shape(&self) -> (usize, usize) {
        self.inner.feature_shape
    }

    /// Genuine-class probability of one raw (unnormalized) feature matrix.
    fn score(&self, rows: Vec<Vec<f64>>) -> PyResult<f64> {
        let m = matrix(&rows, self.inner.feature_kind)?;
        self.inner.score(&m).map_err(py_err)
    }
}

#[pymodule]
fn modspoof(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ModspoofError", m.py().get_type::<ModspoofError>())?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(read_wav, m)?)?;
    m.add_function(wrap_pyfunction!(fix_duration, m)?)?;
    m.add_function(wrap_pyfunction!(log_mel, m)?)?;
    m.add_function(wrap_pyfunction!(extract, m)?)?;
    m.add_function(wrap_pyfunction!(global_modulation, m)?)?;
    m.add_function(wrap_pyfunction!(dct2, m)?)?;
    m.add_function(wrap_pyfunction!(eer, m)?)?;
    m.add_function(wrap_pyfunction!(min_tdcf, m)?)?;
    m.add_function(wrap_pyfunction!(fuse, m)?)?;
    Ok(())
}
