use std::collections::BTreeMap;

use super::{read_wav, Label, Manifest, Split, Utterance};
use crate::augment::{AugPolicy, Variant};
use crate::dsp::{FeatureKind, FeatureMatrix, FrameConfig, Signal};
use crate::Result;

/// Features of one utterance under one augmentation variant.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceFeatures {
    pub id: String,
    pub label: Label,
    pub split: Split,
    pub variant: usize,
    pub features: FeatureMatrix,
}

/// Extracted features for an experiment. Training utterances carry every
/// policy variant; validation and test utterances only the baseline.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub train: Vec<UtteranceFeatures>,
    pub validation: Vec<UtteranceFeatures>,
    pub test: Vec<UtteranceFeatures>,
    pub variants: Vec<Variant>,
}

impl FeatureSet {
    pub fn folds(&self) -> usize {
        self.variants.len() - 1
    }

    pub fn split(&self, split: Split) -> &[UtteranceFeatures] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }
}

/// Loads every utterance in `manifest` and extracts features per the policy.
///
/// Values are rounded through f32, the precision of feature files, so
/// in-memory and on-disk pipelines see identical inputs.
pub fn build_feature_set(
    manifest: &Manifest,
    policy: &AugPolicy,
    baseline: &FrameConfig,
    kind: FeatureKind,
    master_seed: u64,
) -> Result<FeatureSet> {
    let variants = policy.variants(baseline, master_seed)?;
    let audio = load_all(manifest)?;

    let mut banks = BTreeMap::new();
    for (_, signal) in &audio {
        if let std::collections::btree_map::Entry::Vacant(e) = banks.entry(signal.sample_rate()) {
            e.insert(policy.noise_bank(signal.sample_rate(), master_seed)?);
        }
    }

    let extract_one = |(utt, signal): &(&Utterance, Signal)| -> Result<Vec<UtteranceFeatures>> {
        let wanted = if utt.split == Split::Train { &variants[..] } else { &variants[..1] };
        let bank = &banks[&signal.sample_rate()];
        wanted
            .iter()
            .enumerate()
            .map(|(v, variant)| {
                let mut features = variant.extract(signal, kind, &utt.id, master_seed, bank)?;
                features.quantize_f32();
                Ok(UtteranceFeatures {
                    id: utt.id.clone(),
                    label: utt.label,
                    split: utt.split,
                    variant: v,
                    features,
                })
            })
            .collect()
    };
    #[cfg(feature = "parallel")]
    let per_utt: Vec<Result<Vec<UtteranceFeatures>>> = {
        use rayon::prelude::*;
        audio.par_iter().map(extract_one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_utt: Vec<Result<Vec<UtteranceFeatures>>> = audio.iter().map(extract_one).collect();

    let mut set = FeatureSet {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        variants,
    };
    for item in per_utt {
        for f in item? {
            match f.split {
                Split::Train => set.train.push(f),
                Split::Validation => set.validation.push(f),
                Split::Test => set.test.push(f),
            }
        }
    }
    for part in [&mut set.train, &mut set.validation, &mut set.test] {
        part.sort_by(|a, b| (a.id.as_str(), a.variant).cmp(&(b.id.as_str(), b.variant)));
    }
    Ok(set)
}

fn load_all(manifest: &Manifest) -> Result<Vec<(&Utterance, Signal)>> {
    let load = |u: &'_ Utterance| read_wav(&manifest.audio_path(u));
    #[cfg(feature = "parallel")]
    let signals: Vec<Result<Signal>> = {
        use rayon::prelude::*;
        manifest.utterances.par_iter().map(load).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let signals: Vec<Result<Signal>> = manifest.utterances.iter().map(load).collect();
    manifest
        .utterances
        .iter()
        .zip(signals)
        .map(|(u, s)| Ok((u, s?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, SynthParams};

    #[test]
    fn variant_counts_per_split() {
        let dir = tempfile::tempdir().unwrap();
        let params = SynthParams { n_per_class: 5, min_duration_s: 1.0, max_duration_s: 1.2, ..SynthParams::default() };
        let manifest = synth_corpus(&params, 3, dir.path()).unwrap();
        let policy = AugPolicy::Fraug { widths_ms: vec![64.0, 128.0], shift_fractions: vec![0.5, 0.25, 0.1] };
        let set = build_feature_set(&manifest, &policy, &FrameConfig::default(), FeatureKind::LogMel, 7).unwrap();
        assert_eq!(set.folds(), 5);
        let n_train = manifest.split(Split::Train).count();
        assert_eq!(set.train.len(), n_train * 6);
        assert_eq!(set.validation.len(), manifest.split(Split::Validation).count());
        let baseline = FrameConfig::default();
        assert!(set.validation.iter().chain(&set.test).all(|f| f.features.config == baseline && f.variant == 0));
        for v in 0..6 {
            assert_eq!(set.train.iter().filter(|f| f.variant == v).count(), n_train);
        }
    }
}
