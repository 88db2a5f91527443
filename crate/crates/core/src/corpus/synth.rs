use std::f64::consts::PI;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{save_manifest, write_wav, Label, Manifest, Split, Utterance};
use crate::dsp::Signal;
use crate::seed;
use crate::{Error, Result};

/// Per-class voice statistics for the synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    /// Mean speaker F0.
    pub f0_mean_hz: f64,
    /// Between-speaker standard deviation of F0.
    pub f0_spread_hz: f64,
    /// Typical within-utterance F0 movement (intonation depth).
    pub f0_variation_hz: f64,
    pub syllable_rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub n_per_class: usize,
    pub sample_rate: u32,
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    /// Train / validation / test proportions, applied per class.
    pub split_fractions: [f64; 3],
    pub control: ClassProfile,
    pub depressed: ClassProfile,
    pub noise_rms: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_per_class: 50,
            sample_rate: 16_000,
            min_duration_s: 2.0,
            max_duration_s: 6.0,
            split_fractions: [0.6, 0.2, 0.2],
            control: ClassProfile {
                f0_mean_hz: 190.0,
                f0_spread_hz: 35.0,
                f0_variation_hz: 30.0,
                syllable_rate_hz: 4.5,
            },
            depressed: ClassProfile {
                f0_mean_hz: 165.0,
                f0_spread_hz: 35.0,
                f0_variation_hz: 12.0,
                syllable_rate_hz: 3.5,
            },
            noise_rms: 0.003,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        if self.n_per_class == 0 {
            return Err(Error::invalid("n_per_class must be at least 1"));
        }
        if !(self.min_duration_s > 0.0 && self.min_duration_s <= self.max_duration_s) {
            return Err(Error::invalid("need 0 < min_duration_s <= max_duration_s"));
        }
        let sum: f64 = self.split_fractions.iter().sum();
        if self.split_fractions.iter().any(|f| *f < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("split fractions must be non-negative and sum to 1"));
        }
        Ok(())
    }

    fn profile(&self, label: Label) -> &ClassProfile {
        if label == 1 {
            &self.depressed
        } else {
            &self.control
        }
    }
}

// (F1, F2, F3) in Hz
const VOWELS: [(f64, f64, f64); 5] = [
    (730.0, 1090.0, 2440.0),
    (530.0, 1840.0, 2480.0),
    (390.0, 1990.0, 2550.0),
    (570.0, 840.0, 2410.0),
    (440.0, 1020.0, 2240.0),
];

/// Generates the corpus in memory: utterances (with relative `wav/<id>.wav`
/// paths) and their audio. Class 1 speaks lower, flatter and slower than
/// class 0; the class distributions overlap.
pub fn synth_utterances(params: &SynthParams, master_seed: u64) -> Result<Vec<(Utterance, Signal)>> {
    params.validate()?;
    let n = params.n_per_class;
    let n_train = (n as f64 * params.split_fractions[0]).round() as usize;
    let n_val = ((n as f64 * params.split_fractions[1]).round() as usize).min(n - n_train.min(n));
    let mut specs = Vec::with_capacity(2 * n);
    for i in 0..n {
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Validation
        } else {
            Split::Test
        };
        for label in [0u8, 1] {
            let id = format!("c{label}_{i:04}");
            specs.push(Utterance {
                path: Path::new("wav").join(format!("{id}.wav")),
                id,
                label,
                split,
            });
        }
    }

    let render = |u: &Utterance| render_utterance(params, params.profile(u.label), seed::derive(master_seed, &format!("synth/{}", u.id)));
    #[cfg(feature = "parallel")]
    let signals: Vec<Signal> = {
        use rayon::prelude::*;
        specs.par_iter().map(render).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let signals: Vec<Signal> = specs.iter().map(render).collect();

    Ok(specs.into_iter().zip(signals).collect())
}

/// Writes the corpus under `out_dir` (`wav/*.wav` plus `manifest.jsonl`).
pub fn synth_corpus(params: &SynthParams, master_seed: u64, out_dir: &Path) -> Result<Manifest> {
    let items = synth_utterances(params, master_seed)?;
    for (utt, signal) in &items {
        write_wav(&out_dir.join(&utt.path), signal)?;
    }
    let manifest = Manifest::new(items.into_iter().map(|(u, _)| u).collect(), out_dir)?;
    save_manifest(&manifest, &out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

fn render_utterance(params: &SynthParams, profile: &ClassProfile, seed_value: u64) -> Signal {
    let mut rng = seed::rng(seed_value);
    let sr = f64::from(params.sample_rate);
    let duration = rng.random_range(params.min_duration_s..=params.max_duration_s);
    let len = (duration * sr).round() as usize;

    let f0_base = Normal::new(profile.f0_mean_hz, profile.f0_spread_hz)
        .expect("valid normal")
        .sample(&mut rng)
        .clamp(70.0, 350.0);
    let variation = profile.f0_variation_hz * rng.random_range(0.6..1.4);
    let rate = profile.syllable_rate_hz * rng.random_range(0.8..1.2);
    let intonation_phase = rng.random_range(0.0..2.0 * PI);
    let accent = Normal::new(0.0, 0.5 * variation).expect("valid normal");

    let mut speech = vec![0.0; len];
    let mut t = rng.random_range(0.05..0.2);
    while t < duration - 0.15 {
        let syl_len = (rng.random_range(0.55..0.85) / rate).min(duration - 0.05 - t);
        let start = (t * sr) as usize;
        let end = ((t + syl_len) * sr) as usize;
        let shift = accent.sample(&mut rng);
        let (f1, f2, f3) = *VOWELS.choose(&mut rng).expect("non-empty");
        let mut source = vec![0.0; end - start];
        let mut phase = 0.0;
        for (j, s) in source.iter_mut().enumerate() {
            let tau = j as f64 / (end - start) as f64;
            let abs_t = (start + j) as f64 / sr;
            let f0 = (f0_base + shift + variation * (2.0 * PI * 0.35 * abs_t + intonation_phase).sin() - 10.0 * tau)
                .max(50.0);
            let env = (PI * tau).sin();
            phase += f0 / sr;
            if phase >= 1.0 {
                phase -= 1.0;
                *s += env;
            }
            *s += 0.02 * env * rng.random_range(-1.0..1.0);
        }
        for (f, bw) in [(f1, 90.0), (f2, 120.0), (f3, 200.0)] {
            resonate(&mut source, f, bw, sr);
        }
        for (o, s) in speech[start..end].iter_mut().zip(&source) {
            *o += s;
        }
        t += syl_len + rng.random_range(0.25..0.6) / rate;
    }

    let peak = speech.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let noise = Normal::new(0.0, params.noise_rms).expect("valid normal");
    let samples = speech
        .iter()
        .map(|&v| {
            let scaled = if peak > 0.0 { 0.6 * v / peak } else { 0.0 };
            (scaled + noise.sample(&mut rng)).clamp(-1.0, 1.0)
        })
        .collect();
    Signal::new(samples, params.sample_rate).expect("finite synthetic audio")
}

/// Two-pole resonator, in place, unity gain at DC.
fn resonate(x: &mut [f64], freq: f64, bandwidth: f64, sr: f64) {
    let r = (-PI * bandwidth / sr).exp();
    let theta = 2.0 * PI * freq / sr;
    let a1 = 2.0 * r * theta.cos();
    let a2 = -r * r;
    let gain = 1.0 - a1 - a2;
    let (mut y1, mut y2) = (0.0, 0.0);
    for v in x.iter_mut() {
        let y = gain * *v + a1 * y1 + a2 * y2;
        y2 = y1;
        y1 = y;
        *v = y;
    }
}
