use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mlp::{class_index, cross_entropy, Mlp};
use super::{LabeledFeature, MlpModel, Reduction};
use crate::augment::{rng_from_seed, worker_rng, MaskSpec};
use crate::dsp::Normalizer;
use crate::error::{Error, Result};
use crate::protocol::Key;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub seed: u64,
    pub hidden: usize,
    pub reduction: Reduction,
    /// Share of each class held out for checkpoint selection.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 32,
            weight_decay: 1e-4,
            seed: 0,
            hidden: 32,
            reduction: Reduction::FlattenTopK { rows: 16, cols: 32 },
            validation_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::InvalidConfig("batch size and hidden width must be positive".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidConfig(format!(
                "validation fraction must be in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy on the (unaugmented) training split after the epoch.
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub model: MlpModel,
    pub history: Vec<EpochStats>,
    /// Epoch of the returned parameters (0 is the initialization).
    pub best_epoch: usize,
}

fn mean_loss(net: &Mlp, inputs: &[(Vec<f64>, Key)]) -> f64 {
    let total: f64 = inputs
        .iter()
        .map(|(x, k)| cross_entropy(net.logits(x).expect("prepared inputs match"), class_index(*k)))
        .sum();
    total / inputs.len() as f64
}

/// Fraction of features whose thresholded genuine probability (>= 0.5) matches the key.
pub fn accuracy(model: &MlpModel, data: &[LabeledFeature]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("accuracy over no features"));
    }
    let hits = data
        .iter()
        .map(|f| Ok(usize::from((model.score(&f.feature)? >= 0.5) == (f.key == Key::Bonafide))))
        .sum::<Result<usize>>()?;
    Ok(hits as f64 / data.len() as f64)
}

/// Mini-batch SGD on cross-entropy.
///
/// Everything random (initialization, the validation split, batch order)
/// comes from `cfg.seed`; masking draws come from the mask's own seed. The
/// returned parameters are those with the lowest validation loss (the last
/// epoch's when nothing is held out), rounded to binary32.
pub fn train(
    dataset: &[LabeledFeature],
    normalizer: &Normalizer,
    cfg: &TrainConfig,
    augment: Option<&MaskSpec>,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if let Some(spec) = augment {
        spec.validate()?;
    }
    let first = dataset
        .first()
        .ok_or(Error::EmptyInput("training set"))?;
    let (kind, shape) = (first.feature.kind(), first.feature.shape());
    if let Some(bad) = dataset
        .iter()
        .find(|f| f.feature.kind() != kind || f.feature.shape() != shape)
    {
        return Err(Error::Shape(format!(
            "{} is {:?} {}x{}, the training set starts with {kind:?} {}x{}",
            bad.utterance_id,
            bad.feature.kind(),
            bad.feature.rows(),
            bad.feature.cols(),
            shape.0,
            shape.1
        )));
    }
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, f) in dataset.iter().enumerate() {
        by_class[class_index(f.key)].push(i);
    }
    if by_class.iter().any(Vec::is_empty) {
        return Err(Error::Degenerate("training needs both bonafide and spoof features".into()));
    }

    let mut rng = rng_from_seed(cfg.seed);
    let input_dim = cfg.reduction.output_dim(shape.0);
    let mut model = MlpModel {
        feature_kind: kind,
        feature_shape: shape,
        reduction: cfg.reduction,
        normalizer: normalizer.to_single_precision(),
        network: Mlp::glorot(input_dim, cfg.hidden, &mut rng)?,
    };

    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for class in &mut by_class {
        class.shuffle(&mut rng);
        let n_val = ((cfg.validation_fraction * class.len() as f64).floor() as usize).min(class.len() - 1);
        val_idx.extend_from_slice(&class[..n_val]);
        train_idx.extend_from_slice(&class[n_val..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();

    let prepare_all = |idx: &[usize], model: &MlpModel| -> Result<Vec<(Vec<f64>, Key)>> {
        idx.par_iter()
            .map(|&i| Ok((model.prepare(&dataset[i].feature, None)?, dataset[i].key)))
            .collect()
    };
    let clean_train = prepare_all(&train_idx, &model)?;
    let clean_val = prepare_all(&val_idx, &model)?;

    let mut aug_rng = augment.map(|spec| worker_rng(spec.seed, 0));
    let mut best = (
        if clean_val.is_empty() { f64::INFINITY } else { mean_loss(&model.network, &clean_val) },
        model.network.clone(),
        0,
    );
    let mut history = Vec::with_capacity(cfg.epochs);
    // Positions into `train_idx` / `clean_train`.
    let mut order: Vec<usize> = (0..train_idx.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let augmented: Vec<(Vec<f64>, Key)> = match (augment, aug_rng.as_mut()) {
                (Some(spec), Some(r)) if !spec.is_identity() => chunk
                    .iter()
                    .map(|&p| {
                        let f = &dataset[train_idx[p]];
                        Ok((model.prepare(&f.feature, Some((spec, &mut *r)))?, f.key))
                    })
                    .collect::<Result<_>>()?,
                _ => Vec::new(),
            };
            let batch: Vec<(&[f64], Key)> = if augmented.is_empty() {
                chunk
                    .iter()
                    .map(|&p| (clean_train[p].0.as_slice(), clean_train[p].1))
                    .collect()
            } else {
                augmented.iter().map(|(x, k)| (x.as_slice(), *k)).collect()
            };
            let (loss, grad) = model.network.loss_and_grad(&batch, cfg.weight_decay)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            model.network.step(&grad, cfg.learning_rate);
        }
        let train_loss = mean_loss(&model.network, &clean_train);
        if !train_loss.is_finite() || model.network.parameters().iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                loss: train_loss,
            });
        }
        let validation_loss = (!clean_val.is_empty()).then(|| mean_loss(&model.network, &clean_val));
        history.push(EpochStats {
            epoch,
            train_loss,
            validation_loss,
        });
        match validation_loss {
            Some(v) if v < best.0 => best = (v, model.network.clone(), epoch),
            None => best = (f64::INFINITY, model.network.clone(), epoch),
            _ => {}
        }
    }

    model.network = best.1.to_single_precision();
    Ok(TrainOutput {
        model,
        history,
        best_epoch: best.2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{FeatureKind, FeatureMatrix};
    use crate::protocol::AttackId;

    /// Two Gaussian-free clusters separated along the first coordinate.
    fn toy() -> Vec<LabeledFeature> {
        (0..40)
            .map(|i| {
                let bona = i % 2 == 0;
                let t = i as f64 / 40.0;
                let x = if bona { 1.0 + t } else { -1.0 - t };
                let y = (i as f64 * 0.7).sin();
                LabeledFeature {
                    utterance_id: format!("u{i}"),
                    attack_id: if bona { AttackId::Bonafide } else { AttackId::Known(7) },
                    key: if bona { Key::Bonafide } else { Key::Spoof },
                    feature: FeatureMatrix::new(1, 2, vec![x, y], FeatureKind::GlobalMod).unwrap(),
                }
            })
            .collect()
    }

    fn cfg() -> TrainConfig {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 20,
            batch_size: 4,
            weight_decay: 0.0,
            seed: 9,
            hidden: 6,
            reduction: Reduction::FlattenTopK { rows: 1, cols: 2 },
            validation_fraction: 0.0,
        }
    }

    #[test]
    fn separable_toy_set() {
        let data = toy();
        let out = train(&data, &Normalizer::None, &cfg(), None).unwrap();
        assert_eq!(out.history.len(), 20);
        for w in out.history[..10].windows(2) {
            assert!(w[1].train_loss < w[0].train_loss, "{:?}", out.history);
        }
        assert_eq!(accuracy(&out.model, &data).unwrap(), 1.0);
        assert_eq!(out.best_epoch, 20);
    }

    #[test]
    fn fixed_seed_is_bitwise_reproducible() {
        let data = toy();
        let a = train(&data, &Normalizer::None, &cfg(), None).unwrap();
        let b = train(&data, &Normalizer::None, &cfg(), None).unwrap();
        let bits = |m: &MlpModel| m.network.parameters().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.model), bits(&b.model));
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let data = toy();
        let c = TrainConfig {
            learning_rate: 0.0,
            weight_decay: 0.3,
            ..cfg()
        };
        let out = train(&data, &Normalizer::None, &c, None).unwrap();
        let init = Mlp::glorot(2, 6, &mut rng_from_seed(9)).unwrap();
        assert_eq!(out.model.network, init);
    }

    #[test]
    fn augmentation_changes_the_trajectory() {
        let data: Vec<LabeledFeature> = toy()
            .into_iter()
            .map(|mut f| {
                let v = f.feature.values().to_vec();
                let wide: Vec<f64> = (0..8).map(|i| v[i % 2] * (1.0 + i as f64 * 0.1)).collect();
                f.feature = FeatureMatrix::new(2, 4, wide, FeatureKind::GlobalMod).unwrap();
                f
            })
            .collect();
        let c = TrainConfig {
            reduction: Reduction::FlattenTopK { rows: 2, cols: 4 },
            ..cfg()
        };
        let spec = MaskSpec {
            max_masks_per_axis: 2,
            max_width_fraction: 0.5,
            fill_value: None,
            seed: 4,
        };
        let plain = train(&data, &Normalizer::None, &c, None).unwrap();
        let masked = train(&data, &Normalizer::None, &c, Some(&spec)).unwrap();
        assert_ne!(plain.model.network, masked.model.network);
        let again = train(&data, &Normalizer::None, &c, Some(&spec)).unwrap();
        assert_eq!(masked.model.network, again.model.network);
    }

    #[test]
    fn validation_checkpoint_is_the_minimum() {
        let data = toy();
        let c = TrainConfig {
            validation_fraction: 0.25,
            ..cfg()
        };
        let out = train(&data, &Normalizer::None, &c, None).unwrap();
        let losses: Vec<f64> = out.history.iter().map(|h| h.validation_loss.unwrap()).collect();
        let min = losses.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(out.best_epoch >= 1);
        assert_eq!(losses[out.best_epoch - 1], min);
    }

    #[test]
    fn divergence_and_bad_inputs() {
        let data = toy();
        let c = TrainConfig {
            learning_rate: 1e300,
            ..cfg()
        };
        assert!(matches!(
            train(&data, &Normalizer::None, &c, None),
            Err(Error::Diverged { .. })
        ));
        let spoofs: Vec<_> = data.iter().filter(|f| f.key == Key::Spoof).cloned().collect();
        assert!(matches!(
            train(&spoofs, &Normalizer::None, &cfg(), None),
            Err(Error::Degenerate(_))
        ));
        let bad = TrainConfig {
            batch_size: 0,
            ..cfg()
        };
        assert!(train(&data, &Normalizer::None, &bad, None).is_err());
    }
}
