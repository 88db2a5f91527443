//! Browser demo for the `fraug` crate.
//!
//! Three operations are exported to JavaScript, each returning JSON:
//! a log-mel image of a synthetic utterance at a chosen frame rate, the
//! variant table of a FrAUG grid, and a McNemar p-value calculator. The
//! logic lives in plain functions so it can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use fraug::augment::fraug_plan;
use fraug::corpus::{synth_utterances, SynthParams};
use fraug::dsp::{frame_count, log_mel, FrameConfig};
use fraug::stats::{mcnemar, mcnemar_statistic, McNemarMode, PairedOutcomes};

const SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Serialize)]
pub struct Image {
    pub frames: usize,
    pub dims: usize,
    /// Row-major, one row per frame.
    pub values: Vec<f32>,
    pub min: f32,
    pub max: f32,
    pub width_samples: usize,
    pub shift_samples: usize,
    pub duration_s: f64,
}

/// Log-mel features of a 2 s synthetic utterance of class `label`.
pub fn spectrogram(width_ms: f64, shift_fraction: f64, label: u8, seed: u64) -> fraug::Result<Image> {
    let params = SynthParams {
        n_per_class: 1,
        min_duration_s: 2.0,
        max_duration_s: 2.0,
        split_fractions: [1.0, 0.0, 0.0],
        ..SynthParams::default()
    };
    let (_, signal) = synth_utterances(&params, seed)?
        .into_iter()
        .find(|(u, _)| u.label == label.min(1))
        .expect("one utterance per class");
    let config = FrameConfig {
        frame_width_ms: width_ms,
        frame_shift_fraction: shift_fraction,
        ..FrameConfig::default()
    };
    let geometry = config.geometry(SAMPLE_RATE)?;
    let features = log_mel(&signal, &config)?;
    let values: Vec<f32> = features.values.as_slice().iter().map(|&v| v as f32).collect();
    let min = values.iter().copied().fold(f32::INFINITY, f32::min);
    let max = values.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    Ok(Image {
        frames: features.frames(),
        dims: features.dims(),
        values,
        min,
        max,
        width_samples: geometry.width,
        shift_samples: geometry.shift,
        duration_s: signal.duration_secs(),
    })
}

#[derive(Debug, Serialize)]
pub struct PlanRow {
    pub label: String,
    pub width_ms: f64,
    pub shift_ms: f64,
    pub frames: usize,
    pub segments: usize,
}

#[derive(Debug, Serialize)]
pub struct PlanTable {
    pub folds: usize,
    pub rows: Vec<PlanRow>,
}

/// Every configuration of the grid with the frame and 120-frame segment
/// counts it yields for `duration_s` seconds of 16 kHz audio.
pub fn plan(widths_ms: &[f64], shift_fractions: &[f64], duration_s: f64) -> fraug::Result<PlanTable> {
    let plan = fraug_plan(widths_ms, shift_fractions, &FrameConfig::default())?;
    let samples = (duration_s.max(0.0) * f64::from(SAMPLE_RATE)).round() as usize;
    let rows = plan
        .configs()
        .iter()
        .map(|c| {
            let g = c.geometry(SAMPLE_RATE)?;
            let frames = frame_count(samples, g.width, g.shift)?;
            Ok(PlanRow {
                label: c.label(),
                width_ms: c.frame_width_ms,
                shift_ms: c.shift_ms(),
                frames,
                segments: frames / 120,
            })
        })
        .collect::<fraug::Result<Vec<_>>>()?;
    Ok(PlanTable {
        folds: plan.fold_count(),
        rows,
    })
}

#[derive(Debug, Serialize)]
pub struct McNemarOut {
    pub p_value: f64,
    pub test: String,
    pub statistic: f64,
}

pub fn mcnemar_p(b: u64, c: u64, mode: &str) -> fraug::Result<McNemarOut> {
    let mode: McNemarMode = mode.parse()?;
    let paired = PairedOutcomes { a: 0, b, c, d: 0 };
    Ok(McNemarOut {
        p_value: mcnemar(&paired, mode)?,
        test: mode.resolve(&paired).to_string(),
        statistic: mcnemar_statistic(&paired)?,
    })
}

fn to_js<T: Serialize>(r: fraug::Result<T>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
        .and_then(|v| serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string())))
}

fn parse_list(s: &str) -> Result<Vec<f64>, JsValue> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| JsValue::from_str(&format!("not a number: {t}"))))
        .collect()
}

#[wasm_bindgen(js_name = logMelImage)]
pub fn log_mel_image(width_ms: f64, shift_percent: f64, label: u8, seed: u64) -> Result<String, JsValue> {
    to_js(spectrogram(width_ms, shift_percent / 100.0, label, seed))
}

/// `widths` in ms and `shifts` in percent, both comma-separated.
#[wasm_bindgen(js_name = planTable)]
pub fn plan_table(widths: &str, shifts: &str, duration_s: f64) -> Result<String, JsValue> {
    let shifts: Vec<f64> = parse_list(shifts)?.into_iter().map(|s| s / 100.0).collect();
    to_js(plan(&parse_list(widths)?, &shifts, duration_s))
}

#[wasm_bindgen(js_name = mcnemarP)]
pub fn mcnemar_js(b: u32, c: u32, mode: &str) -> Result<String, JsValue> {
    to_js(mcnemar_p(u64::from(b), u64::from(c), mode))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_shape_follows_frame_rate() {
        let img = spectrogram(64.0, 0.5, 1, 3).unwrap();
        assert_eq!((img.width_samples, img.shift_samples), (1024, 512));
        assert_eq!(img.frames, frame_count(32_000, 1024, 512).unwrap());
        assert_eq!(img.values.len(), img.frames * img.dims);
        assert!(img.min <= img.max);
        let fine = spectrogram(64.0, 0.1, 1, 3).unwrap();
        assert!(fine.frames > 4 * img.frames);
    }

    #[test]
    fn paper_grids() {
        assert_eq!(plan(&[64.0, 128.0], &[0.5, 0.25, 0.1], 4.0).unwrap().folds, 5);
        let t = plan(&[32.0, 64.0, 128.0], &[0.5, 0.25, 0.1], 4.0).unwrap();
        assert_eq!((t.folds, t.rows.len()), (8, 9));
        assert_eq!(t.rows[0].label, "L64_R50");
    }

    #[test]
    fn mcnemar_calculator() {
        let out = mcnemar_p(10, 0, "auto").unwrap();
        assert!((out.p_value - 0.001_953_125).abs() < 1e-12);
        assert_eq!(out.test, "exact");
        assert!(mcnemar_p(0, 0, "auto").is_err());
        assert!(mcnemar_p(1, 2, "bogus").is_err());
    }
}
