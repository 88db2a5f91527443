use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{stft, FrameConfig, Matrix, Signal, Spectrogram};
use crate::{Error, Result};

/// Floor added before the logarithm so silence maps to `ln(1e-10)`.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    #[default]
    LogMel,
    Mfcc,
}

impl FeatureKind {
    pub fn dims(self, config: &FrameConfig) -> usize {
        match self {
            FeatureKind::LogMel => config.num_mel_filters,
            FeatureKind::Mfcc => config.num_cepstra,
        }
    }
}

/// Frame-level features with the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Matrix,
    pub kind: FeatureKind,
    pub config: FrameConfig,
}

impl FeatureMatrix {
    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn dims(&self) -> usize {
        self.values.cols()
    }

    /// Copy of rows `start..start + count` with the same provenance.
    pub fn slice_frames(&self, start: usize, count: usize) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.slice_rows(start, count),
            kind: self.kind,
            config: self.config.clone(),
        }
    }

    /// Rounds every value through `f32`, the precision of feature files.
    pub fn quantize_f32(&mut self) {
        for v in self.values.as_mut_slice() {
            *v = f64::from(*v as f32);
        }
    }
}

pub fn hz_to_mel(hz: f64) -> Result<f64> {
    if hz.is_nan() || hz < 0.0 {
        return Err(Error::invalid(format!("frequency must be non-negative, got {hz}")));
    }
    Ok(2595.0 * (1.0 + hz / 700.0).log10())
}

pub fn mel_to_hz(mel: f64) -> Result<f64> {
    if mel.is_nan() || mel < 0.0 {
        return Err(Error::invalid(format!("mel value must be non-negative, got {mel}")));
    }
    Ok(700.0 * (10f64.powf(mel / 2595.0) - 1.0))
}

/// Triangular mel filterbank, `num_mel_filters x (dft_size / 2 + 1)`.
///
/// Filter centres are equally spaced on the mel scale between `fmin` and
/// `fmax` and snapped to the nearest DFT bin; each triangle rises from the
/// previous centre bin to 1.0 at its own and falls to zero at the next.
pub fn mel_filterbank(config: &FrameConfig, sample_rate: u32) -> Result<Matrix> {
    let geom = config.geometry(sample_rate)?;
    let (fmin, fmax) = config.mel_band(sample_rate)?;
    let n_filters = config.num_mel_filters;
    let bins = geom.dft_size / 2 + 1;

    let mel_lo = hz_to_mel(fmin)?;
    let mel_hi = hz_to_mel(fmax)?;
    let step = (mel_hi - mel_lo) / (n_filters + 1) as f64;
    let hz_per_bin = f64::from(sample_rate) / geom.dft_size as f64;
    let edges = (0..n_filters + 2)
        .map(|i| {
            let hz = mel_to_hz(mel_lo + step * i as f64)?;
            Ok(((hz / hz_per_bin).round() as usize).min(bins - 1))
        })
        .collect::<Result<Vec<usize>>>()?;

    let mut fb = Matrix::zeros(n_filters, bins);
    for i in 0..n_filters {
        let (left, centre, right) = (edges[i], edges[i + 1], edges[i + 2]);
        let row = fb.row_mut(i);
        for (k, w) in row.iter_mut().enumerate().take(right + 1).skip(left) {
            *w = if k == centre {
                1.0
            } else if k < centre {
                (k - left) as f64 / (centre - left) as f64
            } else {
                (right - k) as f64 / (right - centre) as f64
            };
        }
    }
    Ok(fb)
}

/// `ln(filterbank * |X|^2 + 1e-10)` from an existing magnitude spectrogram.
pub fn log_mel_from_spectrogram(spec: &Spectrogram) -> Result<FeatureMatrix> {
    let fb = mel_filterbank(&spec.config, spec.sample_rate)?;
    let mut mel = spec.power().matmul(&fb.transpose());
    for v in mel.as_mut_slice() {
        *v = (*v + LOG_FLOOR).ln();
    }
    Ok(FeatureMatrix {
        values: mel,
        kind: FeatureKind::LogMel,
        config: spec.config.clone(),
    })
}

pub fn log_mel(signal: &Signal, config: &FrameConfig) -> Result<FeatureMatrix> {
    log_mel_from_spectrogram(&stft(signal, config)?)
}

/// Orthonormal DCT-II basis, `n_out x n_in`.
pub fn dct_matrix(n_out: usize, n_in: usize) -> Matrix {
    let mut m = Matrix::zeros(n_out, n_in);
    let n = n_in as f64;
    for k in 0..n_out {
        let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        for (i, v) in m.row_mut(k).iter_mut().enumerate() {
            *v = scale * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos();
        }
    }
    m
}

pub fn mfcc_from_spectrogram(spec: &Spectrogram) -> Result<FeatureMatrix> {
    let logmel = log_mel_from_spectrogram(spec)?;
    let dct = dct_matrix(spec.config.num_cepstra, spec.config.num_mel_filters);
    Ok(FeatureMatrix {
        values: logmel.values.matmul(&dct.transpose()),
        kind: FeatureKind::Mfcc,
        config: spec.config.clone(),
    })
}

pub fn mfcc(signal: &Signal, config: &FrameConfig) -> Result<FeatureMatrix> {
    mfcc_from_spectrogram(&stft(signal, config)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_examples() {
        assert_eq!(hz_to_mel(0.0).unwrap(), 0.0);
        // 2595 * log10(2)
        assert!((hz_to_mel(700.0).unwrap() - 781.172_838_748_031_2).abs() < 1e-6);
        let back = mel_to_hz(hz_to_mel(4000.0).unwrap()).unwrap();
        assert!((back - 4000.0).abs() < 1e-6);
        assert!(hz_to_mel(-1.0).is_err());
        assert!(mel_to_hz(-1.0).is_err());
    }

    #[test]
    fn filterbank_shape_and_apexes() {
        let fb = mel_filterbank(&FrameConfig::default(), 16_000).unwrap();
        assert_eq!((fb.rows(), fb.cols()), (40, 513));
        assert!(fb.as_slice().iter().all(|&w| w >= 0.0));
        for i in 0..fb.rows() {
            let row = fb.row(i);
            let max = row.iter().cloned().fold(0.0, f64::max);
            assert_eq!(max, 1.0);
            assert!(row.iter().sum::<f64>() > 0.0);
            // unimodal: non-decreasing up to the apex, non-increasing after
            let apex = row.iter().position(|&w| w == 1.0).unwrap();
            assert!(row[..=apex].windows(2).all(|p| p[0] <= p[1]));
            assert!(row[apex..].windows(2).all(|p| p[0] >= p[1]));
        }
    }

    #[test]
    fn filterbank_covers_interior_bins() {
        let fb = mel_filterbank(&FrameConfig::default(), 16_000).unwrap();
        let apex = |i: usize| fb.row(i).iter().position(|&w| w == 1.0).unwrap();
        for k in apex(0)..=apex(fb.rows() - 1) {
            let covered = (0..fb.rows()).any(|i| fb.get(i, k) > 0.0);
            assert!(covered, "bin {k} uncovered");
        }
    }

    #[test]
    fn filterbank_rejects_inverted_band() {
        let cfg = FrameConfig { fmin_hz: 5000.0, fmax_hz: Some(4000.0), ..FrameConfig::default() };
        assert!(mel_filterbank(&cfg, 16_000).is_err());
    }

    #[test]
    fn silence_is_log_floor() {
        let sig = Signal::new(vec![0.0; 4096], 16_000).unwrap();
        let f = log_mel(&sig, &FrameConfig::default()).unwrap();
        assert_eq!(f.kind, FeatureKind::LogMel);
        assert_eq!(f.frames(), 7);
        assert!(f.values.as_slice().iter().all(|&v| v == LOG_FLOOR.ln()));
    }

    #[test]
    fn dct_is_orthonormal() {
        let m = dct_matrix(40, 40);
        let id = m.matmul(&m.transpose());
        for r in 0..40 {
            for c in 0..40 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((id.get(r, c) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dct_of_constant_has_only_dc() {
        let m = dct_matrix(30, 40);
        let x = Matrix::from_vec(1, 40, vec![-3.5; 40]);
        let c = x.matmul(&m.transpose());
        assert!((c.get(0, 0) - (-3.5 * 40f64.sqrt())).abs() < 1e-9);
        assert!(c.row(0)[1..].iter().all(|v| v.abs() < 1e-9));
    }
}
