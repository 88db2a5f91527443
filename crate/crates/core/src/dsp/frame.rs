use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hamming,
    Hann,
    Rectangular,
}

/// One analysis frame rate plus the spectral front-end settings that go with it.
///
/// Widths are in milliseconds; the shift is a fraction of the width.
/// `dft_size` and `fmax_hz` are resolved against the sample rate at use
/// time when left unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameConfig {
    pub frame_width_ms: f64,
    pub frame_shift_fraction: f64,
    /// Smallest power of two covering the frame when `None`.
    pub dft_size: Option<usize>,
    pub window: WindowKind,
    pub num_mel_filters: usize,
    pub num_cepstra: usize,
    pub fmin_hz: f64,
    /// Nyquist when `None`.
    pub fmax_hz: Option<f64>,
    /// First-order pre-emphasis coefficient; off when `None`.
    pub pre_emphasis: Option<f64>,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            frame_width_ms: 64.0,
            frame_shift_fraction: 0.5,
            dft_size: None,
            window: WindowKind::Hamming,
            num_mel_filters: 40,
            num_cepstra: 30,
            fmin_hz: 0.0,
            fmax_hz: None,
            pre_emphasis: None,
        }
    }
}

/// A [`FrameConfig`] resolved to sample counts at a concrete sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGeometry {
    pub width: usize,
    pub shift: usize,
    pub dft_size: usize,
}

impl FrameConfig {
    pub fn with_rate(mut self, width_ms: f64, shift_fraction: f64) -> Self {
        self.frame_width_ms = width_ms;
        self.frame_shift_fraction = shift_fraction;
        self
    }

    pub fn shift_ms(&self) -> f64 {
        resolve_shift_ms(self.frame_width_ms, self.frame_shift_fraction)
    }

    /// Checks the sample-rate independent invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_width_ms.is_finite() && self.frame_width_ms > 0.0) {
            return Err(Error::invalid(format!(
                "frame width must be positive, got {} ms",
                self.frame_width_ms
            )));
        }
        if !(self.frame_shift_fraction > 0.0 && self.frame_shift_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "frame shift fraction must be in (0, 1], got {}",
                self.frame_shift_fraction
            )));
        }
        if self.num_mel_filters == 0 || self.num_cepstra == 0 {
            return Err(Error::invalid("filter and cepstrum counts must be positive"));
        }
        if self.num_cepstra > self.num_mel_filters {
            return Err(Error::invalid(format!(
                "num_cepstra ({}) exceeds num_mel_filters ({})",
                self.num_cepstra, self.num_mel_filters
            )));
        }
        if let Some(p) = self.pre_emphasis {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::invalid(format!("pre-emphasis must be in [0, 1), got {p}")));
            }
        }
        Ok(())
    }

    pub fn geometry(&self, sample_rate: u32) -> Result<FrameGeometry> {
        self.validate()?;
        let sr = f64::from(sample_rate);
        let width = (self.frame_width_ms * sr / 1000.0).round() as usize;
        if width < 2 {
            return Err(Error::invalid(format!(
                "frame of {} ms is shorter than two samples at {sample_rate} Hz",
                self.frame_width_ms
            )));
        }
        let shift = ((self.shift_ms() * sr / 1000.0).round() as usize).max(1);
        let dft_size = match self.dft_size {
            Some(n) if n < width => {
                return Err(Error::invalid(format!(
                    "dft_size {n} is smaller than the frame width of {width} samples"
                )))
            }
            Some(n) => n,
            None => width.next_power_of_two(),
        };
        Ok(FrameGeometry {
            width,
            shift,
            dft_size,
        })
    }

    /// `(fmin, fmax)` at `sample_rate`, checked against Nyquist.
    pub fn mel_band(&self, sample_rate: u32) -> Result<(f64, f64)> {
        let nyquist = f64::from(sample_rate) / 2.0;
        let fmax = self.fmax_hz.unwrap_or(nyquist);
        if self.fmin_hz < 0.0 || self.fmin_hz >= fmax {
            return Err(Error::invalid(format!(
                "need 0 <= fmin < fmax, got fmin={} fmax={fmax}",
                self.fmin_hz
            )));
        }
        if fmax > nyquist {
            return Err(Error::invalid(format!(
                "fmax {fmax} Hz exceeds Nyquist {nyquist} Hz"
            )));
        }
        Ok((self.fmin_hz, fmax))
    }

    /// Short label such as `L64_R50` used in file names and reports.
    pub fn label(&self) -> String {
        format!(
            "L{}_R{}",
            trim_float(self.frame_width_ms),
            trim_float(self.frame_shift_fraction * 100.0)
        )
    }
}

fn trim_float(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.replace('.', "p")
}

/// Frame shift in milliseconds for a width and a fraction of that width.
pub fn resolve_shift_ms(width_ms: f64, shift_fraction: f64) -> f64 {
    width_ms * shift_fraction
}

/// Number of complete frames; a trailing partial frame is dropped.
pub fn frame_count(num_samples: usize, width: usize, shift: usize) -> Result<usize> {
    if width == 0 || shift == 0 {
        return Err(Error::invalid("frame width and shift must be at least one sample"));
    }
    if num_samples < width {
        return Ok(0);
    }
    Ok((num_samples - width) / shift + 1)
}

/// Symmetric window of `length` points.
pub fn window_coefficients(kind: WindowKind, length: usize) -> Result<Vec<f64>> {
    if length < 2 {
        return Err(Error::invalid(format!("window length must be >= 2, got {length}")));
    }
    let denom = (length - 1) as f64;
    let w = (0..length)
        .map(|n| {
            let phase = 2.0 * PI * n as f64 / denom;
            match kind {
                WindowKind::Hamming => 0.54 - 0.46 * phase.cos(),
                WindowKind::Hann => 0.5 - 0.5 * phase.cos(),
                WindowKind::Rectangular => 1.0,
            }
        })
        .collect();
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_count(n: usize, width: usize, shift: usize) -> usize {
        let mut count = 0;
        let mut start = 0;
        while start + width <= n {
            count += 1;
            start += shift;
        }
        count
    }

    #[test]
    fn frame_count_examples() {
        assert_eq!(brute_force_count(16_000, 1024, 512), 30);
        assert_eq!(frame_count(16_000, 1024, 512).unwrap(), 30);
        assert_eq!(frame_count(500, 1024, 512).unwrap(), 0);
        assert_eq!(frame_count(1024, 1024, 512).unwrap(), 1);
        assert!(frame_count(10, 0, 1).is_err());
        assert!(frame_count(10, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn frame_count_matches_sliding_enumeration(n in 0usize..5000, w in 1usize..600, s in 1usize..600) {
            prop_assert_eq!(frame_count(n, w, s).unwrap(), brute_force_count(n, w, s));
        }
    }

    #[test]
    fn window_endpoints_and_centre() {
        let w = window_coefficients(WindowKind::Hamming, 401).unwrap();
        assert!((w[0] - 0.08).abs() < 1e-15);
        assert!((w[200] - 1.0).abs() < 1e-15);
        assert!(window_coefficients(WindowKind::Rectangular, 17)
            .unwrap()
            .iter()
            .all(|&v| v == 1.0));
        let h = window_coefficients(WindowKind::Hann, 9).unwrap();
        assert!(h[0].abs() < 1e-15 && (h[4] - 1.0).abs() < 1e-15);
        assert!(window_coefficients(WindowKind::Hann, 1).is_err());
    }

    #[test]
    fn geometry_defaults() {
        let g = FrameConfig::default().geometry(16_000).unwrap();
        assert_eq!(g, FrameGeometry { width: 1024, shift: 512, dft_size: 1024 });
        let g = FrameConfig::default().with_rate(128.0, 0.1).geometry(16_000).unwrap();
        assert_eq!((g.width, g.shift, g.dft_size), (2048, 205, 2048));
        let g = FrameConfig::default().with_rate(25.0, 0.4).geometry(16_000).unwrap();
        assert_eq!((g.width, g.shift, g.dft_size), (400, 160, 512));
    }

    #[test]
    fn geometry_rejects_bad_configs() {
        let mut c = FrameConfig::default();
        c.dft_size = Some(512);
        assert!(c.geometry(16_000).is_err());
        let c = FrameConfig::default().with_rate(64.0, 0.0);
        assert!(c.geometry(16_000).is_err());
        let c = FrameConfig { num_cepstra: 41, ..FrameConfig::default() };
        assert!(c.validate().is_err());
        let c = FrameConfig { fmax_hz: Some(9000.0), ..FrameConfig::default() };
        assert!(c.mel_band(16_000).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(FrameConfig::default().label(), "L64_R50");
        assert_eq!(FrameConfig::default().with_rate(128.0, 0.1).label(), "L128_R10");
        assert_eq!(FrameConfig::default().with_rate(25.0, 0.125).label(), "L25_R12p5");
    }
}
