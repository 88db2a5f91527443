use serde::{Deserialize, Serialize};

use super::{forward, ModelParams};
use crate::dsp::{FeatureMatrix, Matrix};
use crate::{Error, Result};

/// Per-dimension affine normalization estimated on training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dims: usize) -> Self {
        Self {
            mean: vec![0.0; dims],
            std: vec![1.0; dims],
        }
    }

    /// Mean and standard deviation of every column over all rows of `matrices`.
    pub fn fit<'a>(matrices: impl IntoIterator<Item = &'a Matrix>) -> Result<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for m in matrices {
            if sum.is_empty() {
                sum = vec![0.0; m.cols()];
                sq = vec![0.0; m.cols()];
            }
            if m.cols() != sum.len() {
                return Err(Error::invalid("feature matrices disagree on dimensionality"));
            }
            for r in 0..m.rows() {
                for (c, &v) in m.row(r).iter().enumerate() {
                    sum[c] += v;
                    sq[c] += v * v;
                }
            }
            n += m.rows();
        }
        if n == 0 {
            return Err(Error::invalid("no frames to estimate normalization from"));
        }
        let n = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / n - m * m).max(0.0);
                if var > 1e-12 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, m: &Matrix) -> Matrix {
        let mut out = m.clone();
        for r in 0..out.rows() {
            for ((v, mu), sd) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - mu) / sd;
            }
        }
        out
    }
}

/// Utterance-level decision from segment probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub segment_probs: Vec<f64>,
    pub utterance_prob: f64,
    /// 1 when `utterance_prob >= 0.5`.
    pub utterance_label: u8,
}

/// Order-independent mean: values are summed in sorted order.
fn stable_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Averages model probabilities per segment, then segment probabilities
/// per utterance; ties at 0.5 are classified positive.
pub fn ensemble_predict(models: &[ModelParams], segments: &[Matrix]) -> Result<Prediction> {
    if models.is_empty() {
        return Err(Error::invalid("ensemble has no models"));
    }
    if segments.is_empty() {
        return Err(Error::invalid("no segments to predict"));
    }
    let mut segment_probs = Vec::with_capacity(segments.len());
    for seg in segments {
        let mut probs = models
            .iter()
            .map(|m| forward(m, seg, None))
            .collect::<Result<Vec<_>>>()?;
        segment_probs.push(stable_mean(&mut probs));
    }
    let utterance_prob = stable_mean(&mut segment_probs.clone());
    Ok(Prediction {
        utterance_label: u8::from(utterance_prob >= 0.5),
        segment_probs,
        utterance_prob,
    })
}

/// Trained models together with the input normalization they expect.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub models: Vec<ModelParams>,
    pub standardizer: Standardizer,
    pub frames_per_segment: usize,
}

impl Ensemble {
    /// Splits an utterance into segments and predicts it.
    ///
    /// An utterance shorter than one segment is scored as a single
    /// shorter segment.
    pub fn predict(&self, features: &FeatureMatrix) -> Result<Prediction> {
        let n = self.frames_per_segment;
        let count = features.frames() / n;
        let segments: Vec<Matrix> = if count == 0 {
            vec![self.standardizer.apply(&features.values)]
        } else {
            (0..count)
                .map(|i| self.standardizer.apply(&features.values.slice_rows(i * n, n)))
                .collect()
        };
        ensemble_predict(&self.models, &segments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn seg(seed_value: u64) -> Matrix {
        let mut rng = seed::rng(seed_value);
        Matrix::from_vec(30, 4, (0..120).map(|_| rng.random_range(-2.0..2.0)).collect())
    }

    fn biased(b2: f64) -> ModelParams {
        let mut p = ModelParams::zeros(4);
        p.b2 = b2;
        p
    }

    #[test]
    fn identical_models_match_single_model() {
        let m = ModelParams::init(4, 11);
        let segs = vec![seg(1), seg(2)];
        let one = ensemble_predict(std::slice::from_ref(&m), &segs).unwrap();
        let five = ensemble_predict(&vec![m; 5], &segs).unwrap();
        for (a, b) in one.segment_probs.iter().zip(&five.segment_probs) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(one.utterance_label, five.utterance_label);
    }

    #[test]
    fn tie_goes_positive() {
        // sigmoid(-x) + sigmoid(x) = 1, so the mean is exactly 0.5
        let logit = (0.8f64 / 0.2).ln();
        let pred = ensemble_predict(&[biased(-logit), biased(logit)], &[seg(1)]).unwrap();
        assert!((pred.utterance_prob - 0.5).abs() < 1e-15);
        let pred = ensemble_predict(&[biased(0.0)], &[seg(1)]).unwrap();
        assert_eq!((pred.utterance_prob, pred.utterance_label), (0.5, 1));
    }

    #[test]
    fn utterance_prob_is_segment_mean() {
        let logit = |p: f64| (p / (1.0 - p)).ln();
        let segs = vec![seg(1), seg(2), seg(3)];
        let mut probs = vec![0.2, 0.4, 0.9];
        assert!((stable_mean(&mut probs) - 0.5).abs() < 1e-15);
        let pred = ensemble_predict(&[biased(logit(0.3))], &segs).unwrap();
        assert!((pred.utterance_prob - 0.3).abs() < 1e-12);
        assert_eq!(pred.utterance_label, 0);
    }

    #[test]
    fn permutation_invariance() {
        let models: Vec<_> = (0..4).map(|s| ModelParams::init(4, s)).collect();
        let segs: Vec<_> = (0..5).map(seg).collect();
        let base = ensemble_predict(&models, &segs).unwrap();
        let mut rm = models.clone();
        rm.reverse();
        let mut rs = segs.clone();
        rs.rotate_left(2);
        let other = ensemble_predict(&rm, &rs).unwrap();
        assert_eq!(base.utterance_prob.to_bits(), other.utterance_prob.to_bits());
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(ensemble_predict(&[], &[seg(1)]).is_err());
        assert!(ensemble_predict(&[biased(0.0)], &[]).is_err());
    }

    #[test]
    fn standardizer_fit() {
        let a = Matrix::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]]);
        let s = Standardizer::fit([&a]).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        let z = s.apply(&a);
        assert_eq!(z.row(0), &[-1.0, 0.0]);
        assert!(Standardizer::fit(std::iter::empty()).is_err());
    }
}
