use crate::dsp::Signal;
use crate::{Error, Result};

/// Plays the signal `factor` times faster: duration divides and pitch
/// multiplies by `factor`.
///
/// Output sample `i` is the linear interpolation of the input at position
/// `i * factor`; the output has `round(len / factor)` samples.
pub fn speed_perturb(signal: &Signal, factor: f64) -> Result<Signal> {
    if !(0.5..=2.0).contains(&factor) {
        return Err(Error::invalid(format!("speed factor must be in [0.5, 2], got {factor}")));
    }
    let x = signal.samples();
    let out_len = (x.len() as f64 / factor).round() as usize;
    let out = (0..out_len).map(|i| interpolate(x, i as f64 * factor)).collect();
    Signal::new(out, signal.sample_rate())
}

fn interpolate(x: &[f64], pos: f64) -> f64 {
    let idx = pos.floor() as usize;
    if idx + 1 >= x.len() {
        return x.last().copied().unwrap_or(0.0);
    }
    let frac = pos - idx as f64;
    if frac == 0.0 {
        x[idx]
    } else {
        x[idx] * (1.0 - frac) + x[idx + 1] * frac
    }
}

/// Linear-interpolation sample-rate conversion.
pub fn resample_linear(samples: &[f64], from_rate: u32, to_rate: u32) -> Vec<f64> {
    if from_rate == to_rate {
        return samples.to_vec();
    }
    let step = f64::from(from_rate) / f64::from(to_rate);
    let out_len = (samples.len() as f64 / step).round() as usize;
    (0..out_len).map(|i| interpolate(samples, i as f64 * step)).collect()
}

/// Shifts pitch by `semitones` while keeping the duration.
///
/// The signal is resampled by `2^(semitones / 12)` and then time-stretched
/// back to its original length with waveform-similarity overlap-add.
pub fn pitch_perturb(signal: &Signal, semitones: f64) -> Result<Signal> {
    if !(semitones.is_finite() && semitones.abs() <= 12.0) {
        return Err(Error::invalid(format!("pitch shift must be within ±12 semitones, got {semitones}")));
    }
    if semitones == 0.0 {
        return Ok(signal.clone());
    }
    let ratio = 2f64.powf(semitones / 12.0);
    let shifted = speed_perturb(signal, ratio)?;
    let stretched = time_stretch(shifted.samples(), signal.len(), signal.sample_rate());
    Signal::new(stretched, signal.sample_rate())
}

/// WSOLA time-stretch of `x` to exactly `target_len` samples.
///
/// Uses 40 ms Hann frames at 50% synthesis overlap; each analysis frame may
/// move up to a quarter frame from its nominal position to best continue
/// the previously copied frame.
pub fn time_stretch(x: &[f64], target_len: usize, sample_rate: u32) -> Vec<f64> {
    if x.is_empty() || target_len == 0 {
        return vec![0.0; target_len];
    }
    let frame = (((0.04 * f64::from(sample_rate)) as usize) / 2 * 2).max(4);
    let hop = frame / 2;
    let tolerance = frame / 4;
    let window: Vec<f64> = (0..frame)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / frame as f64).cos())
        .collect();
    let analysis_hop = hop as f64 * x.len() as f64 / target_len as f64;
    let at = |i: isize| -> f64 {
        if i < 0 || i as usize >= x.len() {
            0.0
        } else {
            x[i as usize]
        }
    };

    let frames = target_len.div_ceil(hop) + 1;
    let mut out = vec![0.0; frames * hop + frame];
    let mut weight = vec![0.0; out.len()];
    let overlap = frame - hop;
    let mut prev: isize = 0;
    for k in 0..frames {
        let nominal = (k as f64 * analysis_hop).round() as isize;
        let start = if k == 0 {
            0
        } else {
            let natural = prev + hop as isize;
            let mut best = nominal;
            let mut best_score = f64::MIN;
            for delta in -(tolerance as isize)..=(tolerance as isize) {
                let cand = nominal + delta;
                if cand < 0 {
                    continue;
                }
                let mut num = 0.0;
                let mut energy = 0.0;
                for j in 0..overlap as isize {
                    let c = at(cand + j);
                    num += c * at(natural + j);
                    energy += c * c;
                }
                let score = if energy > 0.0 { num / energy.sqrt() } else { 0.0 };
                if score > best_score {
                    best_score = score;
                    best = cand;
                }
            }
            best
        };
        let base = k * hop;
        for j in 0..frame {
            out[base + j] += window[j] * at(start + j as isize);
            weight[base + j] += window[j];
        }
        prev = start;
    }
    out.truncate(target_len);
    for (o, w) in out.iter_mut().zip(&weight) {
        if *w > 1e-6 {
            *o /= w;
        }
    }
    out
}
