//! Manifest-driven extraction and the end-to-end synthetic benchmark.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::{fix_duration_with_offset, read_wav, AudioClip};
use crate::augment::rng_from_seed;
use crate::classifier::{accuracy, predict_batch, train, LabeledFeature};
use crate::config::PipelineConfig;
use crate::dsp::{FeatureExtractor, FeatureSpec, Normalizer};
use crate::error::{Error, Result};
use crate::eval::{evaluate, AsvOperatingPoint, Metrics};
use crate::feature_file::{read_feature, write_feature};
use crate::matrix::FeatureMatrix;
use crate::protocol::ProtocolEntry;
use crate::synth::{generate, SynthConfig};

pub const FEATURE_MANIFEST: &str = "features.json";
pub const FEATURE_EXTENSION: &str = "gmf";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioEntry {
    pub utterance_id: String,
    pub path: PathBuf,
}

fn check_utterance_id(id: &str, line: usize) -> Result<()> {
    if id.contains(['/', '\\']) || id == "." || id == ".." {
        return Err(Error::Parse {
            line,
            message: format!("utterance id {id:?} cannot name a file"),
        });
    }
    Ok(())
}

/// Two columns per line, `utterance_id wav_path`; relative paths resolve
/// against `base_dir`. Blank lines and `#` comments are skipped.
pub fn parse_audio_manifest(text: &str, base_dir: &Path) -> Result<Vec<AudioEntry>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [id, path] = fields[..] else {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 2 fields, found {}", fields.len()),
            });
        };
        check_utterance_id(id, i + 1)?;
        if !seen.insert(id.to_string()) {
            return Err(Error::DuplicateUtterance(id.to_string()));
        }
        out.push(AudioEntry {
            utterance_id: id.to_string(),
            path: base_dir.join(path),
        });
    }
    Ok(out)
}

pub fn read_audio_manifest(path: impl AsRef<Path>) -> Result<Vec<AudioEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_audio_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub utterance_id: String,
    /// Relative to the manifest's directory.
    pub path: String,
}

/// Index of an extraction run, written as `features.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub feature: FeatureSpec,
    pub config: PipelineConfig,
    pub entries: Vec<FeatureEntry>,
}

impl FeatureManifest {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join(FEATURE_MANIFEST);
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(&path, text).map_err(|e| Error::io(path, e))
    }

    /// Accepts the manifest file or the directory holding it. Returns the
    /// manifest and the directory its entries are relative to.
    pub fn read(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let file = if path.is_dir() {
            path.join(FEATURE_MANIFEST)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let manifest: FeatureManifest = serde_json::from_str(&text)?;
        let base = file.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok((manifest, base))
    }

    /// Load every feature, in manifest order.
    pub fn load(&self, base: &Path) -> Result<Vec<(String, FeatureMatrix)>> {
        self.entries
            .par_iter()
            .map(|e| Ok((e.utterance_id.clone(), read_feature(base.join(&e.path))?)))
            .collect()
    }
}

/// Cut the clip to the analysis window and compute the configured feature.
pub fn extract_clip(extractor: &FeatureExtractor, clip: &AudioClip, cfg: &PipelineConfig) -> Result<FeatureMatrix> {
    let fixed = fix_duration_with_offset(clip, cfg.duration_seconds, cfg.offset_seconds)?;
    extractor.extract(&fixed, cfg.feature)
}

#[derive(Debug)]
pub struct ExtractReport {
    pub manifest: FeatureManifest,
    pub failures: Vec<(String, Error)>,
}

/// Extract every entry into `out_dir` (`<utterance>.gmf`), then write
/// `features.json` and `config.json`. Work runs on the current rayon pool;
/// files are written afterwards in manifest order. Failed utterances are
/// reported and left out of the manifest.
pub fn extract_to_dir(entries: &[AudioEntry], out_dir: &Path, cfg: &PipelineConfig) -> Result<ExtractReport> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let extractor = FeatureExtractor::new(cfg.stft, cfg.mel)?;
    let results: Vec<Result<FeatureMatrix>> = entries
        .par_iter()
        .map(|e| {
            let clip = read_wav(&e.path, cfg.sample_rate)?;
            extract_clip(&extractor, &clip, cfg)
        })
        .collect();
    let mut manifest = FeatureManifest {
        feature: cfg.feature,
        config: cfg.clone(),
        entries: Vec::with_capacity(entries.len()),
    };
    let mut failures = Vec::new();
    for (entry, result) in entries.iter().zip(results) {
        let name = format!("{}.{FEATURE_EXTENSION}", entry.utterance_id);
        match result.and_then(|m| write_feature(&m, out_dir.join(&name))) {
            Ok(()) => manifest.entries.push(FeatureEntry {
                utterance_id: entry.utterance_id.clone(),
                path: name,
            }),
            Err(e) => failures.push((entry.utterance_id.clone(), e)),
        }
    }
    manifest.write(out_dir)?;
    cfg.write_resolved(out_dir)?;
    Ok(ExtractReport { manifest, failures })
}

/// Attach protocol labels; every feature must have a protocol entry.
pub fn label_features(features: Vec<(String, FeatureMatrix)>, protocol: &[ProtocolEntry]) -> Result<Vec<LabeledFeature>> {
    let by_id: HashMap<&str, &ProtocolEntry> =
        protocol.iter().map(|p| (p.utterance_id.as_str(), p)).collect();
    features
        .into_iter()
        .map(|(id, feature)| {
            let p = by_id.get(id.as_str()).ok_or_else(|| {
                Error::UtteranceMismatch(format!("{id} has no protocol entry"))
            })?;
            Ok(LabeledFeature {
                attack_id: p.attack_id.clone(),
                key: p.key,
                utterance_id: id,
                feature,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthBenchConfig {
    pub synth: SynthConfig,
    pub pipeline: PipelineConfig,
    pub features: Vec<FeatureSpec>,
    /// Share of pairs held out for scoring.
    pub test_fraction: f64,
    pub asv_point: AsvOperatingPoint,
}

impl Default for SynthBenchConfig {
    fn default() -> Self {
        let mut pipeline = PipelineConfig::default();
        pipeline.augment.max_masks_per_axis = 0;
        Self {
            synth: SynthConfig::default(),
            pipeline,
            features: vec![
                FeatureSpec::GlobalMod,
                FeatureSpec::BlockedMod {
                    grid_rows: 2,
                    grid_cols: 2,
                },
            ],
            test_fraction: 0.5,
            asv_point: AsvOperatingPoint {
                p_miss_asv: 0.05,
                p_fa_asv: 0.05,
                p_miss_spoof_asv: 0.9,
            },
        }
    }
}

impl SynthBenchConfig {
    /// Seed the corpus and the pipeline from one value.
    pub fn set_seed(&mut self, seed: u64) {
        self.synth.seed = seed;
        self.pipeline.set_seed(seed);
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.pipeline.validate()?;
        if self.synth.sample_rate != self.pipeline.sample_rate {
            return Err(Error::InvalidConfig(format!(
                "corpus rate {} differs from pipeline rate {}",
                self.synth.sample_rate, self.pipeline.sample_rate
            )));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "test fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.features.is_empty() {
            return Err(Error::InvalidConfig("no features to compare".into()));
        }
        AsvOperatingPoint::new(
            self.asv_point.p_miss_asv,
            self.asv_point.p_fa_asv,
            self.asv_point.p_miss_spoof_asv,
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthBenchRow {
    pub feature: FeatureSpec,
    /// Held-out metrics.
    pub metrics: Metrics,
    pub train_accuracy: f64,
    pub best_epoch: usize,
}

/// Generate the corpus, split it by pair, and for each feature train on one
/// part and evaluate on the other.
pub fn run_synthbench(cfg: &SynthBenchConfig) -> Result<Vec<SynthBenchRow>> {
    cfg.validate()?;
    let clips = generate(&cfg.synth)?;
    let mut pairs: Vec<usize> = (0..cfg.synth.clips_per_class).collect();
    pairs.shuffle(&mut rng_from_seed(cfg.synth.seed));
    let n_test = ((cfg.test_fraction * pairs.len() as f64).round() as usize).clamp(1, pairs.len() - 1);
    let test_pairs: HashSet<usize> = pairs[..n_test].iter().copied().collect();

    let extractor = FeatureExtractor::new(cfg.pipeline.stft, cfg.pipeline.mel)?;
    let mut rows = Vec::with_capacity(cfg.features.len());
    for &feature in &cfg.features {
        let pcfg = PipelineConfig {
            feature,
            ..cfg.pipeline.clone()
        };
        let labeled: Vec<(bool, LabeledFeature)> = clips
            .par_iter()
            .map(|c| {
                Ok((
                    test_pairs.contains(&c.pair),
                    LabeledFeature {
                        utterance_id: c.entry.utterance_id.clone(),
                        attack_id: c.entry.attack_id.clone(),
                        key: c.entry.key,
                        feature: extract_clip(&extractor, &c.clip, &pcfg)?,
                    },
                ))
            })
            .collect::<Result<_>>()?;
        let (test, train_set): (Vec<_>, Vec<_>) = labeled.into_iter().partition(|(t, _)| *t);
        let train_set: Vec<LabeledFeature> = train_set.into_iter().map(|(_, f)| f).collect();
        let test: Vec<LabeledFeature> = test.into_iter().map(|(_, f)| f).collect();

        let fit: Vec<FeatureMatrix> = train_set.iter().map(|f| f.feature.clone()).collect();
        let normalizer = Normalizer::fit(&fit, pcfg.norm)?;
        drop(fit);
        let out = train(&train_set, &normalizer, &pcfg.train, pcfg.mask())?;
        let scores = predict_batch(&out.model, &test)?;
        rows.push(SynthBenchRow {
            feature,
            metrics: evaluate(&scores, &cfg.asv_point, &pcfg.cost)?,
            train_accuracy: accuracy(&out.model, &train_set)?,
            best_epoch: out.best_epoch,
        });
    }
    Ok(rows)
}
