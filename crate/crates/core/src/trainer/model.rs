use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::dsp::Matrix;
use crate::seed;
use crate::{Error, Result};

pub const KERNEL: usize = 3;
pub const CHANNELS: usize = 16;
pub const HIDDEN: usize = 32;
const POOL: usize = 3;

/// All trainable weights. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dims: usize,
    /// `CHANNELS x KERNEL x dims`; channel `c` reads a contiguous
    /// `KERNEL * dims` window of consecutive frames.
    pub conv_w: Vec<f64>,
    pub conv_b: Vec<f64>,
    /// `HIDDEN x CHANNELS`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl ModelParams {
    pub fn zeros(dims: usize) -> Self {
        Self {
            dims,
            conv_w: vec![0.0; CHANNELS * KERNEL * dims],
            conv_b: vec![0.0; CHANNELS],
            w1: vec![0.0; HIDDEN * CHANNELS],
            b1: vec![0.0; HIDDEN],
            w2: vec![0.0; HIDDEN],
            b2: 0.0,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(dims: usize, seed_value: u64) -> Self {
        let mut rng = seed::rng(seed_value);
        let mut p = Self::zeros(dims);
        let mut fill = |w: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in w {
                *v = rng.random_range(-limit..limit);
            }
        };
        fill(&mut p.conv_w, KERNEL * dims, KERNEL * CHANNELS);
        fill(&mut p.w1, CHANNELS, HIDDEN);
        fill(&mut p.w2, HIDDEN, 1);
        p
    }

    pub fn num_params(&self) -> usize {
        self.conv_w.len() + self.conv_b.len() + self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        out.extend_from_slice(&self.conv_w);
        out.extend_from_slice(&self.conv_b);
        out.extend_from_slice(&self.w1);
        out.extend_from_slice(&self.b1);
        out.extend_from_slice(&self.w2);
        out.push(self.b2);
        out
    }

    pub fn from_flat(dims: usize, flat: &[f64]) -> Result<Self> {
        let mut p = Self::zeros(dims);
        if flat.len() != p.num_params() {
            return Err(Error::invalid(format!(
                "expected {} parameters for {dims} input dims, got {}",
                p.num_params(),
                flat.len()
            )));
        }
        let mut rest = flat;
        for part in [&mut p.conv_w, &mut p.conv_b, &mut p.w1, &mut p.b1, &mut p.w2] {
            let (head, tail) = rest.split_at(part.len());
            part.copy_from_slice(head);
            rest = tail;
        }
        p.b2 = rest[0];
        Ok(p)
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        let pairs = [
            (&mut self.conv_w, &other.conv_w),
            (&mut self.conv_b, &other.conv_b),
            (&mut self.w1, &other.w1),
            (&mut self.b1, &other.b1),
            (&mut self.w2, &other.w2),
        ];
        for (a, b) in pairs {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
        self.b2 += scale * other.b2;
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    fn conv_len(&self, segment: &Matrix) -> Result<usize> {
        if segment.cols() != self.dims {
            return Err(Error::invalid(format!(
                "segment has {} dims, model expects {}",
                segment.cols(),
                self.dims
            )));
        }
        let min_frames = KERNEL - 1 + POOL;
        if segment.rows() < min_frames {
            return Err(Error::invalid(format!(
                "segment of {} frames is shorter than the minimum {min_frames}",
                segment.rows()
            )));
        }
        Ok(segment.rows() + 1 - KERNEL)
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Binary cross-entropy with the probability clamped to `[1e-12, 1 - 1e-12]`.
pub fn loss(probability: f64, label: Label) -> f64 {
    let p = probability.clamp(1e-12, 1.0 - 1e-12);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Inverted-dropout mask for a segment of `frames` frames: each conv
/// activation is kept with probability `1 - p` and scaled by `1 / (1 - p)`.
pub fn dropout_mask<R: Rng + ?Sized>(frames: usize, p: f64, rng: &mut R) -> Vec<f64> {
    let len = (frames + 1).saturating_sub(KERNEL) * CHANNELS;
    let keep = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect()
}

struct Trace {
    conv_len: usize,
    /// Post-ReLU, post-dropout conv activations, `conv_len x CHANNELS`.
    act: Vec<f64>,
    /// Pre-activation sign needed for the ReLU derivative.
    pre_pos: Vec<bool>,
    /// Frame index of each pooled maximum, `pools x CHANNELS`.
    argmax: Vec<usize>,
    pools: usize,
    pooled_mean: [f64; CHANNELS],
    hidden: [f64; HIDDEN],
    prob: f64,
}

fn forward_trace(params: &ModelParams, segment: &Matrix, mask: Option<&[f64]>) -> Result<Trace> {
    let conv_len = params.conv_len(segment)?;
    if let Some(m) = mask {
        if m.len() != conv_len * CHANNELS {
            return Err(Error::invalid("dropout mask does not match segment length"));
        }
    }
    let d = params.dims;
    let span = KERNEL * d;
    let x = segment.as_slice();
    let mut act = vec![0.0; conv_len * CHANNELS];
    let mut pre_pos = vec![false; conv_len * CHANNELS];
    for t in 0..conv_len {
        let window = &x[t * d..t * d + span];
        for c in 0..CHANNELS {
            let w = &params.conv_w[c * span..(c + 1) * span];
            let z = params.conv_b[c] + dot(w, window);
            let i = t * CHANNELS + c;
            pre_pos[i] = z > 0.0;
            let a = if z > 0.0 { z } else { 0.0 };
            act[i] = match mask {
                Some(m) => a * m[i],
                None => a,
            };
        }
    }

    let pools = conv_len / POOL;
    let mut argmax = vec![0; pools * CHANNELS];
    let mut pooled_mean = [0.0; CHANNELS];
    for p in 0..pools {
        for c in 0..CHANNELS {
            let mut best_t = p * POOL;
            let mut best = act[best_t * CHANNELS + c];
            for t in p * POOL + 1..p * POOL + POOL {
                let v = act[t * CHANNELS + c];
                if v > best {
                    best = v;
                    best_t = t;
                }
            }
            argmax[p * CHANNELS + c] = best_t;
            pooled_mean[c] += best;
        }
    }
    for v in &mut pooled_mean {
        *v /= pools as f64;
    }

    let mut hidden = [0.0; HIDDEN];
    for (h, out) in hidden.iter_mut().enumerate() {
        let z = params.b1[h] + dot(&params.w1[h * CHANNELS..(h + 1) * CHANNELS], &pooled_mean);
        *out = z.max(0.0);
    }
    let logit = params.b2 + dot(&params.w2, &hidden);
    Ok(Trace {
        conv_len,
        act,
        pre_pos,
        argmax,
        pools,
        pooled_mean,
        hidden,
        prob: sigmoid(logit),
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators let the compiler vectorize
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for k in 0..4 {
            acc[k] += a[4 * i + k] * b[4 * i + k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Probability that `segment` (frames x dims) belongs to class 1.
/// `mask` applies training-time dropout; pass `None` for inference.
pub fn forward(params: &ModelParams, segment: &Matrix, mask: Option<&[f64]>) -> Result<f64> {
    Ok(forward_trace(params, segment, mask)?.prob)
}

/// Accumulates `scale * d loss / d params` for one example into `grad`.
fn backward(params: &ModelParams, segment: &Matrix, trace: &Trace, mask: Option<&[f64]>, label: Label, scale: f64, grad: &mut ModelParams) {
    let d_logit = scale * (trace.prob - f64::from(label));
    grad.b2 += d_logit;
    let mut d_pooled = [0.0; CHANNELS];
    for h in 0..HIDDEN {
        grad.w2[h] += d_logit * trace.hidden[h];
        if trace.hidden[h] <= 0.0 {
            continue;
        }
        let dz = d_logit * params.w2[h];
        grad.b1[h] += dz;
        let row = h * CHANNELS;
        for c in 0..CHANNELS {
            grad.w1[row + c] += dz * trace.pooled_mean[c];
            d_pooled[c] += dz * params.w1[row + c];
        }
    }

    let d = params.dims;
    let span = KERNEL * d;
    let x = segment.as_slice();
    let per_pool = 1.0 / trace.pools as f64;
    for p in 0..trace.pools {
        for c in 0..CHANNELS {
            let t = trace.argmax[p * CHANNELS + c];
            let i = t * CHANNELS + c;
            if !trace.pre_pos[i] {
                continue;
            }
            let m = mask.map_or(1.0, |m| m[i]);
            if m == 0.0 {
                continue;
            }
            let dz = d_pooled[c] * per_pool * m;
            grad.conv_b[c] += dz;
            let window = &x[t * d..t * d + span];
            for (g, &xv) in grad.conv_w[c * span..(c + 1) * span].iter_mut().zip(window) {
                *g += dz * xv;
            }
        }
    }
    debug_assert_eq!(trace.act.len(), trace.conv_len * CHANNELS);
}

/// Gradient of the mean batch loss, and that mean loss.
///
/// `masks`, when given, holds one dropout mask per example.
pub fn batch_gradient(
    params: &ModelParams,
    batch: &[(&Matrix, Label)],
    masks: Option<&[Vec<f64>]>,
) -> Result<(ModelParams, f64)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if let Some(m) = masks {
        if m.len() != batch.len() {
            return Err(Error::invalid("one dropout mask per example required"));
        }
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grad = ModelParams::zeros(params.dims);
    let mut total = 0.0;
    for (i, &(segment, label)) in batch.iter().enumerate() {
        let mask = masks.map(|m| m[i].as_slice());
        let trace = forward_trace(params, segment, mask)?;
        total += loss(trace.prob, label);
        backward(params, segment, &trace, mask, label, scale, &mut grad);
    }
    Ok((grad, total * scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_segment(frames: usize, dims: usize, seed_value: u64) -> Matrix {
        let mut rng = seed::rng(seed_value);
        Matrix::from_vec(frames, dims, (0..frames * dims).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn zero_weights_give_one_half() {
        let p = ModelParams::zeros(40);
        assert_eq!(forward(&p, &random_segment(120, 40, 1), None).unwrap(), 0.5);
    }

    #[test]
    fn output_bias_ten() {
        let mut p = ModelParams::zeros(40);
        p.b2 = 10.0;
        let prob = forward(&p, &random_segment(120, 40, 1), None).unwrap();
        assert!((prob - 1.0 / (1.0 + (-10f64).exp())).abs() < 1e-15);
        assert!((prob - 0.999_954_6).abs() < 1e-7);
    }

    #[test]
    fn output_in_open_unit_interval() {
        for s in 0..20 {
            let p = ModelParams::init(8, s);
            let prob = forward(&p, &random_segment(30, 8, s + 100), None).unwrap();
            assert!(prob > 0.0 && prob < 1.0);
        }
    }

    #[test]
    fn shape_errors() {
        let p = ModelParams::zeros(40);
        assert!(forward(&p, &random_segment(120, 39, 1), None).is_err());
        assert!(forward(&p, &random_segment(4, 40, 1), None).is_err());
        assert!(forward(&p, &random_segment(5, 40, 1), None).is_ok());
        assert!(forward(&p, &random_segment(10, 40, 1), Some(&[1.0; 3])).is_err());
    }

    #[test]
    fn loss_values() {
        assert!((loss(0.5, 0) - 2f64.ln()).abs() < 1e-15);
        assert!((loss(0.5, 1) - 2f64.ln()).abs() < 1e-15);
        assert!(loss(1.0 - 1e-12, 1) < 1e-11);
        assert!((loss(0.9, 0) - 2.302_585_093).abs() < 1e-8);
        assert!(loss(1.0, 0).is_finite());
    }

    #[test]
    fn zero_input_zero_weights_give_zero_conv_gradient() {
        let p = ModelParams::zeros(6);
        let x = Matrix::zeros(20, 6);
        let (g, _) = batch_gradient(&p, &[(&x, 1), (&x, 0)], None).unwrap();
        assert!(g.conv_w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn duplicated_batch_has_same_gradient() {
        let p = ModelParams::init(6, 3);
        let a = random_segment(20, 6, 1);
        let b = random_segment(20, 6, 2);
        let (g1, l1) = batch_gradient(&p, &[(&a, 1), (&b, 0)], None).unwrap();
        let (g2, l2) = batch_gradient(&p, &[(&a, 1), (&b, 0), (&a, 1), (&b, 0)], None).unwrap();
        assert!((l1 - l2).abs() < 1e-14);
        for (x, y) in g1.to_flat().iter().zip(g2.to_flat()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(y.abs()) + 1e-15);
        }
        assert!(batch_gradient(&p, &[], None).is_err());
    }

    #[test]
    fn flat_round_trip() {
        let p = ModelParams::init(7, 9);
        assert_eq!(ModelParams::from_flat(7, &p.to_flat()).unwrap(), p);
        assert!(ModelParams::from_flat(8, &p.to_flat()).is_err());
        assert_eq!(p.num_params(), 16 * 3 * 7 + 16 + 32 * 16 + 32 + 32 + 1);
    }

    #[test]
    fn dropout_mask_values() {
        let mut rng = seed::rng(1);
        let m = dropout_mask(120, 0.05, &mut rng);
        assert_eq!(m.len(), 118 * CHANNELS);
        let keep = 1.0 / 0.95;
        assert!(m.iter().all(|&v| v == 0.0 || v == keep));
        let dropped = m.iter().filter(|&&v| v == 0.0).count() as f64 / m.len() as f64;
        assert!((dropped - 0.05).abs() < 0.02);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let h = 1e-6;
        for draw in 0..5u64 {
            let dims = 3;
            let params = ModelParams::init(dims, draw);
            let segs: Vec<Matrix> = (0..3).map(|i| random_segment(12, dims, draw * 10 + i)).collect();
            let batch: Vec<(&Matrix, Label)> = segs.iter().zip([0u8, 1, 1]).map(|(m, l)| (m, l)).collect();
            let (grad, _) = batch_gradient(&params, &batch, None).unwrap();
            let analytic = grad.to_flat();
            let flat = params.to_flat();
            let mean_loss = |f: &[f64]| {
                let p = ModelParams::from_flat(dims, f).unwrap();
                batch.iter().map(|(m, l)| loss(forward(&p, m, None).unwrap(), *l)).sum::<f64>() / batch.len() as f64
            };
            for i in 0..flat.len() {
                let mut up = flat.clone();
                up[i] += h;
                let mut down = flat.clone();
                down[i] -= h;
                let numeric = (mean_loss(&up) - mean_loss(&down)) / (2.0 * h);
                let scale = analytic[i].abs().max(numeric.abs()).max(1e-5);
                assert!((analytic[i] - numeric).abs() / scale < 1e-4, "draw {draw} coord {i}: {} vs {numeric}", analytic[i]);
            }
        }
    }
}
