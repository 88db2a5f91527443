use serde::{Deserialize, Serialize};

use crate::dsp::FrameConfig;
use crate::{Error, Result};

/// The (width, shift) pair that identifies one FrAUG variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRate {
    pub width_ms: f64,
    pub shift_fraction: f64,
}

/// Ordered frame configurations, baseline first.
#[derive(Debug, Clone, PartialEq)]
pub struct AugPlan {
    configs: Vec<FrameConfig>,
}

impl AugPlan {
    /// Baseline-only plan.
    pub fn baseline(config: FrameConfig) -> Self {
        Self {
            configs: vec![config],
        }
    }

    pub fn configs(&self) -> &[FrameConfig] {
        &self.configs
    }

    pub fn baseline_config(&self) -> &FrameConfig {
        &self.configs[0]
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// Extra training copies beyond the baseline.
    pub fn fold_count(&self) -> usize {
        self.configs.len() - 1
    }

    pub fn rates(&self) -> Vec<FrameRate> {
        self.configs
            .iter()
            .map(|c| FrameRate {
                width_ms: c.frame_width_ms,
                shift_fraction: c.frame_shift_fraction,
            })
            .collect()
    }

    /// JSON array of `{width_ms, shift_fraction}` objects, baseline first.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.rates()).expect("frame rates serialize")
    }

    /// Parses [`AugPlan::to_json`] output; non-rate settings come from `template`.
    pub fn from_json(json: &str, template: &FrameConfig) -> Result<Self> {
        let rates: Vec<FrameRate> = serde_json::from_str(json)?;
        if rates.is_empty() {
            return Err(Error::invalid("plan must contain at least the baseline"));
        }
        let configs = rates
            .iter()
            .enumerate()
            .map(|(i, r)| variant_config(template, r.width_ms, r.shift_fraction, i == 0))
            .collect::<Result<Vec<_>>>()?;
        check_distinct(&configs)?;
        Ok(Self { configs })
    }
}

fn variant_config(base: &FrameConfig, width: f64, shift: f64, is_baseline: bool) -> Result<FrameConfig> {
    let mut c = base.clone().with_rate(width, shift);
    if !is_baseline {
        // a fixed DFT size may not cover wider frames
        c.dft_size = None;
    }
    c.validate()?;
    Ok(c)
}

fn check_distinct(configs: &[FrameConfig]) -> Result<()> {
    for (i, a) in configs.iter().enumerate() {
        for b in &configs[i + 1..] {
            if a.frame_width_ms == b.frame_width_ms && a.frame_shift_fraction == b.frame_shift_fraction {
                return Err(Error::invalid(format!("duplicate frame rate {}", a.label())));
            }
        }
    }
    Ok(())
}

fn check_unique(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(format!("{what} list is empty")));
    }
    for (i, a) in values.iter().enumerate() {
        if values[i + 1..].contains(a) {
            return Err(Error::invalid(format!("duplicate {what} {a}")));
        }
    }
    Ok(())
}

/// Full `widths x shifts` grid with the baseline moved to the front.
///
/// `baseline` supplies both the reference frame rate, which must lie on the
/// grid, and every non-rate setting (window, filter counts, band edges).
pub fn fraug_plan(widths_ms: &[f64], shift_fractions: &[f64], baseline: &FrameConfig) -> Result<AugPlan> {
    check_unique(widths_ms, "frame width")?;
    check_unique(shift_fractions, "frame shift")?;
    baseline.validate()?;
    let on_grid = widths_ms.contains(&baseline.frame_width_ms)
        && shift_fractions.contains(&baseline.frame_shift_fraction);
    if !on_grid {
        return Err(Error::invalid(format!(
            "baseline {} is not in the width x shift grid",
            baseline.label()
        )));
    }

    let mut configs = vec![baseline.clone()];
    for &w in widths_ms {
        for &s in shift_fractions {
            if w == baseline.frame_width_ms && s == baseline.frame_shift_fraction {
                continue;
            }
            configs.push(variant_config(baseline, w, s, false)?);
        }
    }
    Ok(AugPlan { configs })
}
