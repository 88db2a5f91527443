use serde::{Deserialize, Serialize};

use crate::dsp::{Matrix, Spectrogram};
use crate::{Error, Result};

/// Warp factors drawn (uniformly) per fold when VTLP is used as a policy.
pub const VTLP_ALPHAS: [f64; 4] = [0.9, 0.95, 1.05, 1.1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpSpec {
    pub alpha: f64,
    pub boundary_hz: f64,
}

impl WarpSpec {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            boundary_hz: 4800.0,
        }
    }

    fn validate(&self, nyquist: f64) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid(format!("warp factor must be positive, got {}", self.alpha)));
        }
        if !(self.boundary_hz > 0.0 && self.boundary_hz < nyquist) {
            return Err(Error::invalid(format!(
                "boundary {} Hz must lie strictly inside (0, {nyquist})",
                self.boundary_hz
            )));
        }
        if self.alpha * self.boundary_hz >= nyquist {
            return Err(Error::invalid(format!(
                "alpha * boundary ({} Hz) must stay below Nyquist",
                self.alpha * self.boundary_hz
            )));
        }
        Ok(())
    }
}

/// Piecewise-linear frequency map: `alpha * f` up to the boundary, then a
/// straight line that sends Nyquist to Nyquist.
pub fn warp_frequency(f: f64, spec: &WarpSpec, nyquist: f64) -> f64 {
    let b = spec.boundary_hz;
    if f <= b {
        spec.alpha * f
    } else {
        spec.alpha * b + (nyquist - spec.alpha * b) * (f - b) / (nyquist - b)
    }
}

/// Inverse of [`warp_frequency`] and the map's slope at the returned point.
fn unwarp(g: f64, spec: &WarpSpec, nyquist: f64) -> (f64, f64) {
    let knee = spec.alpha * spec.boundary_hz;
    if g <= knee {
        (g / spec.alpha, spec.alpha)
    } else {
        let slope = (nyquist - knee) / (nyquist - spec.boundary_hz);
        (spec.boundary_hz + (g - knee) / slope, slope)
    }
}

/// Vocal-tract length perturbation on a linear-frequency magnitude spectrogram.
///
/// Each output bin reads the input at the unwarped frequency by linear
/// interpolation between neighbouring bins, divided by the local slope of
/// the warp so that a frame's total magnitude is preserved.
pub fn vtlp_warp(spec: &Spectrogram, warp: &WarpSpec) -> Result<Spectrogram> {
    let nyquist = f64::from(spec.sample_rate) / 2.0;
    warp.validate(nyquist)?;
    let bins = spec.bins();
    let hz_per_bin = f64::from(spec.sample_rate) / spec.dft_size as f64;

    let taps: Vec<(usize, f64, f64)> = (0..bins)
        .map(|g| {
            let (src_hz, slope) = unwarp(g as f64 * hz_per_bin, warp, nyquist);
            let pos = (src_hz / hz_per_bin).clamp(0.0, (bins - 1) as f64);
            let idx = (pos.floor() as usize).min(bins - 1);
            (idx, pos - idx as f64, 1.0 / slope)
        })
        .collect();

    let mut out = Matrix::zeros(spec.frames(), bins);
    for r in 0..spec.frames() {
        let src = spec.magnitudes.row(r);
        for (dst, &(idx, frac, gain)) in out.row_mut(r).iter_mut().zip(&taps) {
            let v = if frac == 0.0 || idx + 1 >= bins {
                src[idx]
            } else {
                src[idx] * (1.0 - frac) + src[idx + 1] * frac
            };
            *dst = v * gain;
        }
    }
    Ok(Spectrogram {
        magnitudes: out,
        ..spec.clone()
    })
}
