//! Autocorrelation pitch estimator used to measure what augmentations do
//! to fundamental frequency.

/// Median F0 in Hz over voiced frames, or `None` when no frame is voiced.
///
/// Frames are 40 ms with a 10 ms hop. A frame is voiced when its normalized
/// autocorrelation peak within the `[fmin, fmax]` lag range exceeds 0.5; the
/// first lag reaching 90% of that peak is refined by parabolic
/// interpolation.
pub fn estimate_f0(samples: &[f64], sample_rate: u32, fmin: f64, fmax: f64) -> Option<f64> {
    let sr = f64::from(sample_rate);
    let frame = (0.04 * sr) as usize;
    let hop = (0.01 * sr) as usize;
    let min_lag = (sr / fmax).floor().max(2.0) as usize;
    let max_lag = (sr / fmin).ceil() as usize;
    if samples.len() < frame + max_lag + 1 {
        return frame_f0(samples, sr, min_lag, max_lag.min(samples.len() / 2));
    }
    let mut estimates = Vec::new();
    let mut start = 0;
    while start + frame + max_lag < samples.len() {
        if let Some(f0) = frame_f0(&samples[start..start + frame + max_lag + 1], sr, min_lag, max_lag) {
            estimates.push(f0);
        }
        start += hop;
    }
    median(&mut estimates)
}

fn frame_f0(x: &[f64], sr: f64, min_lag: usize, max_lag: usize) -> Option<f64> {
    if max_lag <= min_lag + 1 || x.len() <= max_lag + 1 {
        return None;
    }
    let n = x.len() - max_lag - 1;
    let corr = |lag: usize| -> f64 {
        let a = &x[..n];
        let b = &x[lag..lag + n];
        let num: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
        let ea: f64 = a.iter().map(|v| v * v).sum();
        let eb: f64 = b.iter().map(|v| v * v).sum();
        if ea <= 0.0 || eb <= 0.0 {
            0.0
        } else {
            num / (ea * eb).sqrt()
        }
    };
    let r: Vec<f64> = (min_lag - 1..=max_lag + 1).map(corr).collect();
    // r[i] corresponds to lag min_lag - 1 + i
    let interior = 1..r.len() - 1;
    let best = interior.clone().map(|i| r[i]).fold(f64::MIN, f64::max);
    if best < 0.5 {
        return None;
    }
    let i = interior
        .clone()
        .find(|&i| r[i] >= 0.9 * best && r[i] >= r[i - 1] && r[i] >= r[i + 1])?;
    let (y0, y1, y2) = (r[i - 1], r[i], r[i + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    let offset = if denom.abs() > 1e-12 { 0.5 * (y0 - y2) / denom } else { 0.0 };
    let lag = (min_lag - 1 + i) as f64 + offset.clamp(-0.5, 0.5);
    Some(sr / lag)
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { 0.5 * (v[mid - 1] + v[mid]) } else { v[mid] })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn tone(f: f64, secs: f64) -> Vec<f64> {
        let sr = 16_000.0;
        (0..(secs * sr) as usize)
            .map(|i| 0.5 * (2.0 * PI * f * i as f64 / sr).sin())
            .collect()
    }

    #[test]
    fn recovers_pure_tones() {
        for f in [110.0, 220.0, 440.0, 484.0] {
            let est = estimate_f0(&tone(f, 0.5), 16_000, 60.0, 600.0).unwrap();
            assert!((est / f - 1.0).abs() < 0.005, "{f}: {est}");
        }
    }

    #[test]
    fn harmonic_complex_reports_fundamental() {
        let sr = 16_000.0;
        let x: Vec<f64> = (0..8000)
            .map(|i| {
                let t = i as f64 / sr;
                (1..6).map(|h| (2.0 * PI * 150.0 * h as f64 * t).sin() / h as f64).sum()
            })
            .collect();
        let est = estimate_f0(&x, 16_000, 60.0, 600.0).unwrap();
        assert!((est / 150.0 - 1.0).abs() < 0.005, "{est}");
    }

    #[test]
    fn silence_is_unvoiced() {
        assert_eq!(estimate_f0(&vec![0.0; 8000], 16_000, 60.0, 600.0), None);
    }
}
