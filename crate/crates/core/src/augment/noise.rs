use std::path::PathBuf;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::Signal;
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseSource {
    /// Every `*.wav` file in a directory, in file-name order.
    Directory(PathBuf),
    White,
    Pink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub source: NoiseSource,
    #[serde(default = "default_snrs")]
    pub snr_choices_db: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

fn default_snrs() -> Vec<f64> {
    vec![0.0, 5.0, 10.0, 15.0]
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.snr_choices_db.is_empty() {
            return Err(Error::invalid("snr_choices_db must not be empty"));
        }
        if let Some(s) = self.snr_choices_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("SNR must be finite, got {s}")));
        }
        Ok(())
    }
}

/// Adds `noise` to `signal` at `snr_db`.
///
/// A segment of the (tiled) noise starting at a random offset is scaled by
/// `g = rms(signal) / (rms(segment) * 10^(snr_db / 20))`. If the mix would
/// clip, signal and noise are scaled down together, which leaves the SNR
/// unchanged.
pub fn mix_noise<R: Rng + ?Sized>(signal: &Signal, noise: &Signal, snr_db: f64, rng: &mut R) -> Result<Signal> {
    if !snr_db.is_finite() {
        return Err(Error::invalid(format!("SNR must be finite, got {snr_db}")));
    }
    if signal.sample_rate() != noise.sample_rate() {
        return Err(Error::invalid(format!(
            "noise sample rate {} differs from signal rate {}",
            noise.sample_rate(),
            signal.sample_rate()
        )));
    }
    if signal.is_empty() || signal.samples().iter().all(|&s| s == 0.0) {
        return Err(Error::invalid("SNR is undefined for an all-zero signal"));
    }
    if noise.is_empty() || noise.samples().iter().all(|&s| s == 0.0) {
        return Err(Error::invalid("noise is all zeros"));
    }

    let n = noise.samples();
    let offset = rng.random_range(0..n.len());
    let mut segment: Vec<f64> = (0..signal.len()).map(|i| n[(offset + i) % n.len()]).collect();
    let seg_rms = crate::dsp::signal_rms(&segment);
    if seg_rms == 0.0 {
        // the chosen window of a sparse noise file can be silent
        return Err(Error::invalid("selected noise segment is all zeros"));
    }
    let gain = signal.rms() / (seg_rms * 10f64.powf(snr_db / 20.0));
    for v in &mut segment {
        *v *= gain;
    }
    let mut mixed: Vec<f64> = signal.samples().iter().zip(&segment).map(|(s, v)| s + v).collect();
    let peak = mixed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 1.0 {
        for v in &mut mixed {
            *v /= peak;
        }
    }
    Signal::new(mixed, signal.sample_rate())
}

/// Seeded Gaussian white noise with RMS 0.1.
pub fn white_noise(len: usize, sample_rate: u32, seed_value: u64) -> Signal {
    let mut rng = seed::rng(seed_value);
    let samples = (0..len)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            (0.1 * v).clamp(-1.0, 1.0)
        })
        .collect();
    Signal::new(samples, sample_rate).expect("finite noise")
}

/// Seeded pink (1/f) noise, Kellet's filter on white noise, scaled to RMS 0.1.
pub fn pink_noise(len: usize, sample_rate: u32, seed_value: u64) -> Signal {
    let mut rng = seed::rng(seed_value);
    let mut b = [0.0f64; 7];
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let white: f64 = StandardNormal.sample(&mut rng);
        b[0] = 0.99886 * b[0] + white * 0.0555179;
        b[1] = 0.99332 * b[1] + white * 0.0750759;
        b[2] = 0.96900 * b[2] + white * 0.1538520;
        b[3] = 0.86650 * b[3] + white * 0.3104856;
        b[4] = 0.55000 * b[4] + white * 0.5329522;
        b[5] = -0.7616 * b[5] - white * 0.0168980;
        let pink = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + white * 0.5362;
        b[6] = white * 0.115926;
        out.push(pink);
    }
    let r = crate::dsp::signal_rms(&out);
    if r > 0.0 {
        for v in &mut out {
            *v = (*v * 0.1 / r).clamp(-1.0, 1.0);
        }
    }
    Signal::new(out, sample_rate).expect("finite noise")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::signal_rms;

    fn achieved_snr(clean: &Signal, mixed: &Signal) -> f64 {
        // undo any joint peak scaling by projecting out the clean part
        let c = clean.samples();
        let m = mixed.samples();
        let scale = m.iter().zip(c).map(|(a, b)| a * b).sum::<f64>()
            / c.iter().map(|v| v * v).sum::<f64>();
        let resid: Vec<f64> = m.iter().zip(c).map(|(a, b)| a - scale * b).collect();
        20.0 * ((scale * signal_rms(c)) / signal_rms(&resid)).log10()
    }

    #[test]
    fn equal_power_at_zero_db_is_unit_gain() {
        let s = Signal::new(vec![0.1, -0.1, 0.1, -0.1], 16_000).unwrap();
        let n = Signal::new(vec![0.1, 0.1, -0.1, -0.1], 16_000).unwrap();
        let mut rng = seed::rng(0);
        let out = mix_noise(&s, &n, 0.0, &mut rng).unwrap();
        // offset is random, but every segment has the same rms
        for (o, (a, _)) in out.samples().iter().zip(s.samples().iter().zip(n.samples())) {
            assert!(((o - a).abs() - 0.1).abs() < 1e-12);
        }
    }

    #[test]
    fn twenty_db_target() {
        let s = white_noise(4000, 16_000, 1);
        let n = pink_noise(4000, 16_000, 2);
        let mut rng = seed::rng(3);
        let out = mix_noise(&s, &n, 20.0, &mut rng).unwrap();
        assert!((achieved_snr(&s, &out) - 20.0).abs() < 0.1);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let s = white_noise(100, 16_000, 1);
        let z = Signal::new(vec![0.0; 100], 16_000).unwrap();
        let mut rng = seed::rng(0);
        assert!(mix_noise(&z, &s, 10.0, &mut rng).is_err());
        assert!(mix_noise(&s, &z, 10.0, &mut rng).is_err());
        assert!(mix_noise(&s, &s, f64::INFINITY, &mut rng).is_err());
        let other_rate = white_noise(100, 8000, 1);
        assert!(mix_noise(&s, &other_rate, 10.0, &mut rng).is_err());
    }

    #[test]
    fn short_noise_is_tiled_and_output_keeps_length() {
        let s = white_noise(1000, 16_000, 5);
        let n = white_noise(37, 16_000, 6);
        let out = mix_noise(&s, &n, 5.0, &mut seed::rng(9)).unwrap();
        assert_eq!(out.len(), 1000);
    }

    #[test]
    fn seeded_generators_are_reproducible() {
        assert_eq!(pink_noise(500, 16_000, 4), pink_noise(500, 16_000, 4));
        assert_ne!(white_noise(500, 16_000, 4), white_noise(500, 16_000, 5));
        assert!((pink_noise(16_000, 16_000, 1).rms() - 0.1).abs() < 1e-3);
    }

    #[test]
    fn spec_validation() {
        let spec = NoiseSpec { source: NoiseSource::Pink, snr_choices_db: vec![], seed: 0 };
        assert!(spec.validate().is_err());
        let spec: NoiseSpec = serde_json::from_str(r#"{"source": "white"}"#).unwrap();
        assert_eq!(spec.snr_choices_db, vec![0.0, 5.0, 10.0, 15.0]);
    }
}
