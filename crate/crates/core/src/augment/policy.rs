use std::borrow::Cow;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    fraug_plan, mix_noise, pink_noise, pitch_perturb, resample_linear, speed_perturb, vtlp_warp,
    white_noise, NoiseSource, WarpSpec, VTLP_ALPHAS,
};
use crate::corpus::read_wav;
use crate::dsp::{self, FeatureKind, FeatureMatrix, FrameConfig, Signal};
use crate::seed;
use crate::{Error, Result};

/// How training data is augmented. Every policy yields `folds + 1` feature
/// variants per training utterance, variant 0 being the untouched baseline.
///
/// Rival policies apply one parameter draw per fold to every utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AugPolicy {
    None,
    Fraug {
        widths_ms: Vec<f64>,
        shift_fractions: Vec<f64>,
    },
    Noise {
        source: NoiseSource,
        #[serde(default = "default_snrs")]
        snr_db: Vec<f64>,
        folds: usize,
    },
    Vtlp {
        folds: usize,
        #[serde(default = "default_boundary")]
        boundary_hz: f64,
        #[serde(default = "default_alphas")]
        alphas: Vec<f64>,
    },
    Speed {
        factors: Vec<f64>,
    },
    Pitch {
        semitones: Vec<f64>,
    },
}

fn default_snrs() -> Vec<f64> {
    vec![0.0, 5.0, 10.0, 15.0]
}

fn default_boundary() -> f64 {
    4800.0
}

fn default_alphas() -> Vec<f64> {
    VTLP_ALPHAS.to_vec()
}

impl AugPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            AugPolicy::None => "none",
            AugPolicy::Fraug { .. } => "fraug",
            AugPolicy::Noise { .. } => "noise",
            AugPolicy::Vtlp { .. } => "vtlp",
            AugPolicy::Speed { .. } => "speed",
            AugPolicy::Pitch { .. } => "pitch",
        }
    }

    /// The concrete variants, baseline first. Per-fold parameters (SNR,
    /// warp factor) are drawn from generators derived from `master_seed`.
    pub fn variants(&self, baseline: &FrameConfig, master_seed: u64) -> Result<Vec<Variant>> {
        let base = Variant {
            config: baseline.clone(),
            transform: Transform::Identity,
        };
        let with = |transform| Variant {
            config: baseline.clone(),
            transform,
        };
        let mut out = vec![base];
        match self {
            AugPolicy::None => {}
            AugPolicy::Fraug {
                widths_ms,
                shift_fractions,
            } => {
                let plan = fraug_plan(widths_ms, shift_fractions, baseline)?;
                out = plan
                    .configs()
                    .iter()
                    .map(|c| Variant {
                        config: c.clone(),
                        transform: Transform::Identity,
                    })
                    .collect();
            }
            AugPolicy::Noise { snr_db, folds, .. } => {
                if snr_db.is_empty() || snr_db.iter().any(|s| !s.is_finite()) {
                    return Err(Error::invalid("noise policy needs finite SNR choices"));
                }
                for fold in 1..=*folds {
                    let mut rng = seed::derived_rng(master_seed, &format!("noise/fold{fold}"));
                    let snr = *snr_db.choose(&mut rng).expect("non-empty");
                    out.push(with(Transform::Noise { fold, snr_db: snr }));
                }
            }
            AugPolicy::Vtlp {
                folds,
                boundary_hz,
                alphas,
            } => {
                if alphas.is_empty() {
                    return Err(Error::invalid("vtlp policy needs at least one warp factor"));
                }
                for fold in 1..=*folds {
                    let mut rng = seed::derived_rng(master_seed, &format!("vtlp/fold{fold}"));
                    let alpha = *alphas.choose(&mut rng).expect("non-empty");
                    out.push(with(Transform::Vtlp(WarpSpec {
                        alpha,
                        boundary_hz: *boundary_hz,
                    })));
                }
            }
            AugPolicy::Speed { factors } => {
                for &f in factors {
                    if !(0.5..=2.0).contains(&f) {
                        return Err(Error::invalid(format!("speed factor {f} outside [0.5, 2]")));
                    }
                    out.push(with(Transform::Speed(f)));
                }
            }
            AugPolicy::Pitch { semitones } => {
                for &s in semitones {
                    if s.is_nan() || s.abs() > 12.0 {
                        return Err(Error::invalid(format!("pitch shift {s} outside ±12 semitones")));
                    }
                    out.push(with(Transform::Pitch(s)));
                }
            }
        }
        Ok(out)
    }

    pub fn fold_count(&self) -> usize {
        match self {
            AugPolicy::None => 0,
            AugPolicy::Fraug {
                widths_ms,
                shift_fractions,
            } => widths_ms.len() * shift_fractions.len() - 1,
            AugPolicy::Noise { folds, .. } | AugPolicy::Vtlp { folds, .. } => *folds,
            AugPolicy::Speed { factors } => factors.len(),
            AugPolicy::Pitch { semitones } => semitones.len(),
        }
    }

    /// Noise clips for the noise policy; empty for every other policy.
    pub fn noise_bank(&self, sample_rate: u32, master_seed: u64) -> Result<Vec<Signal>> {
        let AugPolicy::Noise { source, .. } = self else {
            return Ok(Vec::new());
        };
        let clip_len = sample_rate as usize * 10;
        let bank = match source {
            NoiseSource::White => (0..8)
                .map(|i| white_noise(clip_len, sample_rate, seed::derive(master_seed, &format!("noise/bank{i}"))))
                .collect(),
            NoiseSource::Pink => (0..8)
                .map(|i| pink_noise(clip_len, sample_rate, seed::derive(master_seed, &format!("noise/bank{i}"))))
                .collect(),
            NoiseSource::Directory(dir) => {
                let mut paths: Vec<_> = std::fs::read_dir(dir)?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                    .collect();
                paths.sort();
                let mut bank = Vec::with_capacity(paths.len());
                for p in paths {
                    let clip = read_wav(&p)?;
                    let resampled = resample_linear(clip.samples(), clip.sample_rate(), sample_rate);
                    bank.push(Signal::new(resampled, sample_rate)?);
                }
                bank
            }
        };
        let bank: Vec<Signal> = bank
            .into_iter()
            .filter(|s: &Signal| s.samples().iter().any(|&v| v != 0.0))
            .collect();
        if bank.is_empty() {
            return Err(Error::invalid("noise source provided no usable clips"));
        }
        Ok(bank)
    }
}

/// Waveform or spectral change applied before feature extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Transform {
    Identity,
    Noise { fold: usize, snr_db: f64 },
    Vtlp(WarpSpec),
    Speed(f64),
    Pitch(f64),
}

/// One training-set copy: a frame configuration plus a transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub config: FrameConfig,
    pub transform: Transform,
}

impl Variant {
    /// The waveform this variant extracts features from.
    ///
    /// Frame-rate and spectral variants borrow `signal` unchanged. Noise
    /// selection and offset depend only on `(master_seed, fold,
    /// utterance_id)`, so extraction order does not matter.
    pub fn waveform<'a>(
        &self,
        signal: &'a Signal,
        utterance_id: &str,
        master_seed: u64,
        noise_bank: &[Signal],
    ) -> Result<Cow<'a, Signal>> {
        Ok(match &self.transform {
            Transform::Identity | Transform::Vtlp(_) => Cow::Borrowed(signal),
            Transform::Noise { fold, snr_db } => {
                let mut rng = seed::derived_rng(master_seed, &format!("noise/fold{fold}/{utterance_id}"));
                if noise_bank.is_empty() {
                    return Err(Error::invalid("noise variant without a noise bank"));
                }
                let clip = &noise_bank[rng.random_range(0..noise_bank.len())];
                Cow::Owned(mix_noise(signal, clip, *snr_db, &mut rng)?)
            }
            Transform::Speed(f) => Cow::Owned(speed_perturb(signal, *f)?),
            Transform::Pitch(s) => Cow::Owned(pitch_perturb(signal, *s)?),
        })
    }

    /// Features of `signal` under this variant.
    pub fn extract(
        &self,
        signal: &Signal,
        kind: FeatureKind,
        utterance_id: &str,
        master_seed: u64,
        noise_bank: &[Signal],
    ) -> Result<FeatureMatrix> {
        let wave = self.waveform(signal, utterance_id, master_seed, noise_bank)?;
        match &self.transform {
            Transform::Vtlp(warp) => {
                let spec = vtlp_warp(&dsp::stft(&wave, &self.config)?, warp)?;
                match kind {
                    FeatureKind::LogMel => dsp::log_mel_from_spectrogram(&spec),
                    FeatureKind::Mfcc => dsp::mfcc_from_spectrogram(&spec),
                }
            }
            _ => extract_features(&wave, &self.config, kind),
        }
    }
}

pub fn extract_features(signal: &Signal, config: &FrameConfig, kind: FeatureKind) -> Result<FeatureMatrix> {
    match kind {
        FeatureKind::LogMel => dsp::log_mel(signal, config),
        FeatureKind::Mfcc => dsp::mfcc(signal, config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fold_counts_match_variant_lists() {
        let base = FrameConfig::default();
        let policies = vec![
            AugPolicy::None,
            AugPolicy::Fraug { widths_ms: vec![64.0, 128.0], shift_fractions: vec![0.5, 0.25, 0.1] },
            AugPolicy::Noise { source: NoiseSource::Pink, snr_db: default_snrs(), folds: 7 },
            AugPolicy::Vtlp { folds: 3, boundary_hz: 4800.0, alphas: default_alphas() },
            AugPolicy::Speed { factors: vec![0.9, 1.1, 1.05] },
            AugPolicy::Pitch { semitones: vec![-2.0, -1.0, 1.0, 2.0, 3.0] },
        ];
        let expected = [0, 5, 7, 3, 3, 5];
        for (p, want) in policies.iter().zip(expected) {
            let v = p.variants(&base, 7).unwrap();
            assert_eq!(p.fold_count(), want, "{}", p.name());
            assert_eq!(v.len(), want + 1);
            assert_eq!(v[0], Variant { config: base.clone(), transform: Transform::Identity });
        }
    }

    #[test]
    fn per_fold_draws_are_seeded() {
        let p = AugPolicy::Noise { source: NoiseSource::White, snr_db: default_snrs(), folds: 7 };
        let a = p.variants(&FrameConfig::default(), 3).unwrap();
        assert_eq!(a, p.variants(&FrameConfig::default(), 3).unwrap());
        for v in &a[1..] {
            let Transform::Noise { snr_db, .. } = v.transform else { panic!() };
            assert!([0.0, 5.0, 10.0, 15.0].contains(&snr_db));
        }
    }

    #[test]
    fn policy_json_shape() {
        let p: AugPolicy =
            serde_json::from_str(r#"{"kind": "fraug", "widths_ms": [64, 128], "shift_fractions": [0.5, 0.25, 0.1]}"#)
                .unwrap();
        assert_eq!(p.fold_count(), 5);
        let p: AugPolicy = serde_json::from_str(r#"{"kind": "vtlp", "folds": 3}"#).unwrap();
        assert_eq!(p, AugPolicy::Vtlp { folds: 3, boundary_hz: 4800.0, alphas: default_alphas() });
        let p: AugPolicy = serde_json::from_str(r#"{"kind": "noise", "source": "pink", "folds": 2}"#).unwrap();
        assert_eq!(p.fold_count(), 2);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let base = FrameConfig::default();
        assert!(AugPolicy::Speed { factors: vec![3.0] }.variants(&base, 0).is_err());
        assert!(AugPolicy::Pitch { semitones: vec![13.0] }.variants(&base, 0).is_err());
        assert!(AugPolicy::Fraug { widths_ms: vec![32.0], shift_fractions: vec![0.5] }
            .variants(&base, 0)
            .is_err());
    }
}
