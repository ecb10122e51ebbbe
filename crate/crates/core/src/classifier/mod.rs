//! One-hidden-layer perceptron over a fixed reduction of a feature matrix.

mod mlp;
mod model_file;
mod train;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use mlp::{class_index, cross_entropy, Gradients, Mlp};
pub use model_file::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use train::{accuracy, train, EpochStats, TrainConfig, TrainOutput};

use crate::augment::{augment_feature, AugmentRng, MaskSpec};
use crate::dsp::Normalizer;
use crate::error::{Error, Result};
use crate::matrix::{FeatureKind, FeatureMatrix};
use crate::protocol::{AttackId, Key};
use crate::scores::ScoreRecord;

/// How a feature matrix becomes the network input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Reduction {
    /// Top-left `rows x cols` block (lowest modulation frequencies), row-major.
    FlattenTopK { rows: usize, cols: usize },
    /// Mean of every row across columns.
    MeanOverTime,
}

impl Reduction {
    pub fn tag(self) -> u8 {
        match self {
            Reduction::FlattenTopK { .. } => 0,
            Reduction::MeanOverTime => 1,
        }
    }

    /// Input dimension for a `rows x cols` feature.
    pub fn output_dim(self, rows: usize) -> usize {
        match self {
            Reduction::FlattenTopK { rows: kr, cols: kc } => kr * kc,
            Reduction::MeanOverTime => rows,
        }
    }
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reduction::FlattenTopK { rows, cols } => write!(f, "topk:{rows}x{cols}"),
            Reduction::MeanOverTime => f.write_str("mean-time"),
        }
    }
}

impl FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "mean-time" {
            return Ok(Reduction::MeanOverTime);
        }
        let dims = s.strip_prefix("topk:").and_then(|d| {
            let (r, c) = d.split_once('x')?;
            Some((r.parse::<usize>().ok()?, c.parse::<usize>().ok()?))
        });
        match dims {
            Some((rows, cols)) if rows > 0 && cols > 0 => Ok(Reduction::FlattenTopK { rows, cols }),
            _ => Err(Error::InvalidConfig(format!(
                "unknown reduction {s:?} (expected topk:RxC or mean-time)"
            ))),
        }
    }
}

impl TryFrom<String> for Reduction {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Reduction> for String {
    fn from(r: Reduction) -> String {
        r.to_string()
    }
}

pub fn reduce_input(feature: &FeatureMatrix, reduction: Reduction) -> Result<Vec<f64>> {
    let (rows, cols) = feature.shape();
    match reduction {
        Reduction::FlattenTopK { rows: kr, cols: kc } => {
            if kr == 0 || kc == 0 || kr > rows || kc > cols {
                return Err(Error::Shape(format!(
                    "cannot take a {kr}x{kc} block from a {rows}x{cols} feature"
                )));
            }
            Ok((0..kr).flat_map(|r| feature.row(r)[..kc].iter().copied()).collect())
        }
        Reduction::MeanOverTime => Ok((0..rows)
            .map(|r| feature.row(r).iter().sum::<f64>() / cols as f64)
            .collect()),
    }
}

/// A feature with the labels needed for training and score files.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeature {
    pub utterance_id: String,
    pub attack_id: AttackId,
    pub key: Key,
    pub feature: FeatureMatrix,
}

/// Network plus everything needed to turn a stored feature into its input.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub feature_kind: FeatureKind,
    pub feature_shape: (usize, usize),
    pub reduction: Reduction,
    pub normalizer: Normalizer,
    pub network: Mlp,
}

impl MlpModel {
    /// Normalize, optionally augment, then reduce.
    pub fn prepare(
        &self,
        feature: &FeatureMatrix,
        augment: Option<(&MaskSpec, &mut AugmentRng)>,
    ) -> Result<Vec<f64>> {
        if feature.kind() != self.feature_kind || feature.shape() != self.feature_shape {
            return Err(Error::Shape(format!(
                "model expects {:?} {}x{}, got {:?} {}x{}",
                self.feature_kind,
                self.feature_shape.0,
                self.feature_shape.1,
                feature.kind(),
                feature.rows(),
                feature.cols()
            )));
        }
        let normalized = self.normalizer.apply(feature)?.matrix;
        let input = match augment {
            Some((spec, rng)) if !spec.is_identity() => augment_feature(&normalized, spec, rng)?,
            _ => normalized,
        };
        reduce_input(&input, self.reduction)
    }

    /// Genuine-class probability of one feature.
    pub fn score(&self, feature: &FeatureMatrix) -> Result<f64> {
        Ok(self.network.forward(&self.prepare(feature, None)?)?.0)
    }
}

/// Score every feature (in parallel); output order follows the input.
pub fn predict_batch(model: &MlpModel, features: &[LabeledFeature]) -> Result<Vec<ScoreRecord>> {
    features
        .par_iter()
        .map(|f| {
            let score = model.score(&f.feature).map_err(|e| match e {
                Error::Shape(msg) => Error::Shape(format!("{}: {msg}", f.utterance_id)),
                other => other,
            })?;
            Ok(ScoreRecord::new(f.utterance_id.clone(), f.attack_id.clone(), f.key, score))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_slices_low_block() {
        let v: Vec<f64> = (0..80 * 398).map(|i| i as f64).collect();
        let m = FeatureMatrix::new(80, 398, v, FeatureKind::GlobalMod).unwrap();
        let x = reduce_input(&m, Reduction::FlattenTopK { rows: 16, cols: 32 }).unwrap();
        assert_eq!(x.len(), 512);
        assert_eq!(x[0], 0.0);
        assert_eq!(x[31], 31.0);
        assert_eq!(x[32], 398.0);
        assert_eq!(x[511], (15 * 398 + 31) as f64);
        let dc = reduce_input(&m, Reduction::FlattenTopK { rows: 1, cols: 1 }).unwrap();
        assert_eq!(dc, vec![0.0]);
        assert!(reduce_input(&m, Reduction::FlattenTopK { rows: 81, cols: 1 }).is_err());
    }

    #[test]
    fn mean_over_time_of_constant_columns() {
        let col = [1.5, -2.0, 7.0];
        let rows: Vec<Vec<f64>> = col.iter().map(|&c| vec![c; 6]).collect();
        let m = FeatureMatrix::from_rows(&rows, FeatureKind::LogMel).unwrap();
        assert_eq!(reduce_input(&m, Reduction::MeanOverTime).unwrap(), col.to_vec());
    }

    #[test]
    fn reduction_strings() {
        for r in [Reduction::FlattenTopK { rows: 16, cols: 32 }, Reduction::MeanOverTime] {
            assert_eq!(r.to_string().parse::<Reduction>().unwrap(), r);
        }
        assert!("topk:0x3".parse::<Reduction>().is_err());
        assert!("topk:3".parse::<Reduction>().is_err());
    }

    #[test]
    fn predictions_are_probabilities_in_order() {
        use crate::augment::rng_from_seed;
        let network = Mlp::glorot(4, 8, &mut rng_from_seed(5)).unwrap();
        let model = MlpModel {
            feature_kind: FeatureKind::GlobalMod,
            feature_shape: (2, 3),
            reduction: Reduction::FlattenTopK { rows: 2, cols: 2 },
            normalizer: Normalizer::None,
            network,
        };
        let mut state = 1u64;
        let feats: Vec<LabeledFeature> = (0..1000)
            .map(|i| {
                let v = (0..6)
                    .map(|_| {
                        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 20.0
                    })
                    .collect();
                LabeledFeature {
                    utterance_id: format!("u{i}"),
                    attack_id: AttackId::Bonafide,
                    key: Key::Bonafide,
                    feature: FeatureMatrix::new(2, 3, v, FeatureKind::GlobalMod).unwrap(),
                }
            })
            .collect();
        let scores = predict_batch(&model, &feats).unwrap();
        assert_eq!(scores.len(), 1000);
        for (s, f) in scores.iter().zip(&feats) {
            assert_eq!(s.utterance_id, f.utterance_id);
            assert!(s.score > 0.0 && s.score < 1.0);
            assert_eq!(s.score, model.score(&f.feature).unwrap());
        }
        assert!(predict_batch(&model, &[]).unwrap().is_empty());

        let wrong = FeatureMatrix::zeros(2, 3, FeatureKind::LogMel);
        assert!(matches!(model.score(&wrong), Err(Error::Shape(_))));
    }
}
