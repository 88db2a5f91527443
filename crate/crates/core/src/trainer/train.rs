use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{batch_gradient, dropout_mask, Ensemble, ModelParams, Standardizer};
use crate::augment::AugPolicy;
use crate::corpus::{balanced_sample, build_feature_set, random_crop, segmentize, Manifest, Segment, SegmentTag, UtteranceFeatures};
use crate::dsp::{FeatureKind, FrameConfig, Matrix};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout_p: f64,
    pub seed: u64,
    pub ensemble_size: usize,
    pub frames_per_segment: usize,
    /// Learning rate multiplier applied when the epoch loss has not improved
    /// for `plateau_patience` epochs. 1.0 disables the schedule.
    pub lr_reduction_factor: f64,
    pub plateau_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.01,
            batch_size: 32,
            dropout_p: 0.05,
            seed: 0,
            ensemble_size: 5,
            frames_per_segment: 120,
            lr_reduction_factor: 1.0,
            plateau_patience: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::invalid(format!("dropout probability {} outside [0, 1)", self.dropout_p)));
        }
        if self.ensemble_size == 0 {
            return Err(Error::invalid("ensemble size must be at least 1"));
        }
        if self.frames_per_segment < 5 {
            return Err(Error::invalid("segments need at least 5 frames"));
        }
        if !(self.lr_reduction_factor > 0.0 && self.lr_reduction_factor <= 1.0) {
            return Err(Error::invalid("learning rate reduction factor must be in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: ModelParams,
    /// Mean training loss of every epoch.
    pub loss_curve: Vec<f64>,
}

/// Crops each augmentation variant to its shortest member, cuts segments
/// and draws a class-balanced subset.
///
/// Every variant index forms its own crop group, with its own seed.
pub fn build_training_subset(train: &[UtteranceFeatures], frames_per_segment: usize, seed_value: u64) -> Result<Vec<Segment>> {
    let mut groups: BTreeMap<usize, Vec<&UtteranceFeatures>> = BTreeMap::new();
    for u in train {
        groups.entry(u.variant).or_default().push(u);
    }
    let mut segments = Vec::new();
    for (variant, mut group) in groups {
        group.sort_by(|a, b| a.id.cmp(&b.id));
        let matrices: Vec<_> = group.iter().map(|u| u.features.clone()).collect();
        let cropped = random_crop(&matrices, seed::derive(seed_value, &format!("crop/v{variant}")))?;
        for (u, features) in group.iter().zip(&cropped) {
            let tag = SegmentTag {
                utterance: u.id.clone(),
                variant,
                label: u.label,
            };
            segments.extend(segmentize(features, frames_per_segment, &tag)?);
        }
    }
    balanced_sample(segments, seed::derive(seed_value, "balance"))
}

/// Mini-batch gradient descent on already standardized segments.
pub fn train_model(
    segments: &[(Matrix, u8)],
    init: ModelParams,
    config: &TrainConfig,
    seed_value: u64,
) -> Result<TrainedModel> {
    config.validate()?;
    if segments.is_empty() {
        return Err(Error::invalid("no training segments"));
    }
    let mut rng = seed::derived_rng(seed_value, "sgd");
    let mut params = init;
    let mut order: Vec<usize> = (0..segments.len()).collect();
    let mut lr = config.learning_rate;
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut loss_curve = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&Matrix, u8)> = chunk.iter().map(|&i| (&segments[i].0, segments[i].1)).collect();
            let masks: Option<Vec<Vec<f64>>> = (config.dropout_p > 0.0).then(|| {
                batch
                    .iter()
                    .map(|(m, _)| dropout_mask(m.rows(), config.dropout_p, &mut rng))
                    .collect()
            });
            let (grad, mean_loss) = batch_gradient(&params, &batch, masks.as_deref())?;
            params.add_scaled(&grad, -lr);
            total += mean_loss * batch.len() as f64;
        }
        if !params.is_finite() {
            return Err(Error::invalid("training diverged to non-finite parameters"));
        }
        let epoch_loss = total / segments.len() as f64;
        loss_curve.push(epoch_loss);
        if epoch_loss < best {
            best = epoch_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.plateau_patience && config.lr_reduction_factor < 1.0 {
                lr *= config.lr_reduction_factor;
                stale = 0;
            }
        }
    }
    Ok(TrainedModel { params, loss_curve })
}

/// Trains `ensemble_size` models, each on its own freshly drawn subset.
///
/// Member seeds depend only on `config.seed` and the member index, so the
/// result does not depend on thread count or on the training data order.
pub fn train_ensemble(train: &[UtteranceFeatures], config: &TrainConfig) -> Result<(Ensemble, Vec<TrainedModel>)> {
    config.validate()?;
    let labels: Vec<u8> = train.iter().map(|u| u.label).collect();
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::invalid("training split needs both classes"));
    }
    let mut baseline: Vec<&UtteranceFeatures> = train.iter().filter(|u| u.variant == 0).collect();
    baseline.sort_by(|a, b| a.id.cmp(&b.id));
    let standardizer = Standardizer::fit(baseline.iter().map(|u| &u.features.values))?;
    let dims = standardizer.mean.len();

    let member = |m: usize| -> Result<TrainedModel> {
        let model_seed = seed::derive(config.seed, &format!("model{m}"));
        let subset = build_training_subset(train, config.frames_per_segment, seed::derive(model_seed, "subset"))?;
        let data: Vec<(Matrix, u8)> = subset
            .iter()
            .map(|s| (standardizer.apply(&s.features.values), s.label()))
            .collect();
        let init = ModelParams::init(dims, seed::derive(model_seed, "init"));
        train_model(&data, init, config, model_seed)
    };
    #[cfg(feature = "parallel")]
    let trained: Vec<Result<TrainedModel>> = {
        use rayon::prelude::*;
        (0..config.ensemble_size).into_par_iter().map(member).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let trained: Vec<Result<TrainedModel>> = (0..config.ensemble_size).map(member).collect();
    let trained = trained.into_iter().collect::<Result<Vec<_>>>()?;

    let ensemble = Ensemble {
        models: trained.iter().map(|t| t.params.clone()).collect(),
        standardizer,
        frames_per_segment: config.frames_per_segment,
    };
    Ok((ensemble, trained))
}

/// Extracts features for `manifest` under `policy` and trains an ensemble
/// on the training split.
pub fn train(
    manifest: &Manifest,
    policy: &AugPolicy,
    baseline: &FrameConfig,
    kind: FeatureKind,
    config: &TrainConfig,
    master_seed: u64,
) -> Result<(Ensemble, Vec<TrainedModel>)> {
    config.validate()?;
    let set = build_feature_set(manifest, policy, baseline, kind, master_seed)?;
    if set.train.is_empty() {
        return Err(Error::invalid("manifest has no training utterances"));
    }
    train_ensemble(&set.train, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;
    use crate::dsp::FeatureMatrix;
    use rand::Rng;

    fn toy_features(id: &str, label: u8, variant: usize, frames: usize, seed_value: u64) -> UtteranceFeatures {
        let mut rng = seed::rng(seed_value);
        let centre = if label == 1 { 1.0 } else { -1.0 };
        let data = (0..frames * 3).map(|_| centre + rng.random_range(-0.5..0.5)).collect();
        UtteranceFeatures {
            id: id.into(),
            label,
            split: Split::Train,
            variant,
            features: FeatureMatrix {
                values: Matrix::from_vec(frames, 3, data),
                kind: FeatureKind::LogMel,
                config: FrameConfig::default(),
            },
        }
    }

    fn toy_set() -> Vec<UtteranceFeatures> {
        (0..8)
            .map(|i| toy_features(&format!("u{i}"), (i % 2) as u8, 0, 30 + i, i as u64))
            .collect()
    }

    fn quick() -> TrainConfig {
        TrainConfig {
            epochs: 20,
            learning_rate: 0.01,
            batch_size: 4,
            seed: 3,
            ensemble_size: 2,
            frames_per_segment: 10,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn rejects_bad_config() {
        let bad = [
            TrainConfig { epochs: 0, ..quick() },
            TrainConfig { learning_rate: 0.0, ..quick() },
            TrainConfig { dropout_p: 1.0, ..quick() },
            TrainConfig { batch_size: 0, ..quick() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
            assert!(train_ensemble(&toy_set(), &c).is_err());
        }
    }

    #[test]
    fn single_class_rejected() {
        let one: Vec<_> = toy_set().into_iter().filter(|u| u.label == 1).collect();
        assert!(train_ensemble(&one, &quick()).is_err());
    }

    #[test]
    fn deterministic() {
        let (a, ca) = train_ensemble(&toy_set(), &quick()).unwrap();
        let (b, cb) = train_ensemble(&toy_set(), &quick()).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
    }

    #[test]
    fn input_order_irrelevant() {
        let mut shuffled = toy_set();
        shuffled.reverse();
        let (a, _) = train_ensemble(&toy_set(), &quick()).unwrap();
        let (b, _) = train_ensemble(&shuffled, &quick()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subset_balanced_and_cropped() {
        let subset = build_training_subset(&toy_set(), 10, 1).unwrap();
        // shortest utterance has 30 frames: 3 segments each, 4 per class
        assert_eq!(subset.len(), 24);
        let pos = subset.iter().filter(|s| s.label() == 1).count();
        assert_eq!(pos, 12);
    }

    #[test]
    fn separable_toy_loss_monotone() {
        let config = TrainConfig {
            epochs: 40,
            dropout_p: 0.0,
            batch_size: 1000,
            ..quick()
        };
        let data: Vec<(Matrix, u8)> = build_training_subset(&toy_set(), 10, 5)
            .unwrap()
            .into_iter()
            .map(|s| (s.features.values.clone(), s.label()))
            .collect();
        let model = train_model(&data, ModelParams::init(3, 9), &config, 1).unwrap();
        let curve = &model.loss_curve;
        for w in curve[5..].windows(2) {
            assert!(w[1] <= w[0], "loss rose: {curve:?}");
        }
        assert!(curve.last().unwrap() < &curve[0]);
    }

    #[test]
    fn learns_toy_problem() {
        let config = TrainConfig {
            epochs: 60,
            learning_rate: 0.05,
            ..quick()
        };
        let (ensemble, _) = train_ensemble(&toy_set(), &config).unwrap();
        for u in toy_set() {
            let pred = ensemble.predict(&u.features).unwrap();
            assert_eq!(pred.utterance_label, u.label, "{}: {}", u.id, pred.utterance_prob);
        }
    }
}
