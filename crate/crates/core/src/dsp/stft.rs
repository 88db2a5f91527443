use rustfft::{num_complex::Complex, FftPlanner};

use super::{frame_count, window_coefficients, FrameConfig, Matrix, Signal};
use crate::Result;

/// Magnitude STFT: `frames x (dft_size / 2 + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub magnitudes: Matrix,
    pub config: FrameConfig,
    pub sample_rate: u32,
    pub dft_size: usize,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.magnitudes.rows()
    }

    pub fn bins(&self) -> usize {
        self.magnitudes.cols()
    }

    /// Centre frequency of bin `k` in Hz.
    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * f64::from(self.sample_rate) / self.dft_size as f64
    }

    pub fn power(&self) -> Matrix {
        let data = self.magnitudes.as_slice().iter().map(|m| m * m).collect();
        Matrix::from_vec(self.magnitudes.rows(), self.magnitudes.cols(), data)
    }
}

/// Short-time Fourier transform of complete frames.
///
/// Frame `r` covers samples `r * shift .. r * shift + width`, is multiplied by
/// the analysis window, zero-padded to `dft_size` and transformed. A signal
/// shorter than one frame yields a spectrogram with zero rows.
pub fn stft(signal: &Signal, config: &FrameConfig) -> Result<Spectrogram> {
    let geom = config.geometry(signal.sample_rate())?;
    let window = window_coefficients(config.window, geom.width)?;
    let samples = match config.pre_emphasis {
        Some(a) if a > 0.0 => pre_emphasize(signal.samples(), a),
        _ => signal.samples().to_vec(),
    };
    let frames = frame_count(samples.len(), geom.width, geom.shift)?;
    let bins = geom.dft_size / 2 + 1;
    let mut magnitudes = Matrix::zeros(frames, bins);

    let fft = FftPlanner::<f64>::new().plan_fft_forward(geom.dft_size);
    let mut buffer = vec![Complex::new(0.0, 0.0); geom.dft_size];
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for r in 0..frames {
        let start = r * geom.shift;
        let frame = &samples[start..start + geom.width];
        for (slot, (&x, &w)) in buffer.iter_mut().zip(frame.iter().zip(&window)) {
            *slot = Complex::new(x * w, 0.0);
        }
        for slot in &mut buffer[geom.width..] {
            *slot = Complex::new(0.0, 0.0);
        }
        fft.process_with_scratch(&mut buffer, &mut scratch);
        for (m, c) in magnitudes.row_mut(r).iter_mut().zip(&buffer[..bins]) {
            *m = c.norm();
        }
    }

    Ok(Spectrogram {
        magnitudes,
        config: config.clone(),
        sample_rate: signal.sample_rate(),
        dft_size: geom.dft_size,
    })
}

fn pre_emphasize(x: &[f64], coeff: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut prev = 0.0;
    for &v in x {
        out.push(v - coeff * prev);
        prev = v;
    }
    out
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::dsp::WindowKind;

    fn rect(width_ms: f64, dft: usize) -> FrameConfig {
        FrameConfig {
            frame_width_ms: width_ms,
            frame_shift_fraction: 0.5,
            dft_size: Some(dft),
            window: WindowKind::Rectangular,
            ..FrameConfig::default()
        }
    }

    #[test]
    fn dc_input_lands_in_bin_zero() {
        // 64 samples at 8 kHz = 8 ms
        let sig = Signal::new(vec![1.0; 256], 8000).unwrap();
        let spec = stft(&sig, &rect(8.0, 64)).unwrap();
        assert_eq!(spec.frames(), 7);
        for r in 0..spec.frames() {
            let row = spec.magnitudes.row(r);
            assert!((row[0] - 64.0).abs() < 1e-9);
            assert!(row[1..].iter().all(|&m| m < 1e-9));
        }
    }

    #[test]
    fn bin_centred_sinusoid_peaks_at_its_bin() {
        let n = 64;
        let f = 5;
        let x: Vec<f64> = (0..256)
            .map(|m| (2.0 * PI * f as f64 * m as f64 / n as f64).cos())
            .collect();
        let spec = stft(&Signal::new(x, 8000).unwrap(), &rect(8.0, n)).unwrap();
        for r in 0..spec.frames() {
            let row = spec.magnitudes.row(r);
            let peak = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(peak, f);
            for (k, &m) in row.iter().enumerate() {
                if k != f {
                    assert!(m < 1e-9, "leak at bin {k}: {m}");
                }
            }
        }
    }

    #[test]
    fn short_signal_gives_empty_spectrogram() {
        let sig = Signal::new(vec![0.1; 100], 16_000).unwrap();
        let spec = stft(&sig, &FrameConfig::default()).unwrap();
        assert_eq!(spec.frames(), 0);
        assert_eq!(spec.bins(), 513);
    }

    #[test]
    fn pre_emphasis_changes_spectrum_only_when_enabled() {
        let x: Vec<f64> = (0..2048).map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        let sig = Signal::new(x, 16_000).unwrap();
        let plain = stft(&sig, &FrameConfig::default()).unwrap();
        let cfg = FrameConfig { pre_emphasis: Some(0.97), ..FrameConfig::default() };
        let emph = stft(&sig, &cfg).unwrap();
        assert_eq!(plain.frames(), emph.frames());
        assert_ne!(plain.magnitudes, emph.magnitudes);
    }
}
