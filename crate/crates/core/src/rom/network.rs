//! Encoder–decoder forward pass and backpropagation through time.

use serde::{Deserialize, Serialize};

use super::cell::{CellCache, LstmLayer};
use super::RomError;
use crate::rng::SeededRng;

/// Encoder input features: normalized time and normalized rate.
pub const ENCODER_FEATURES: usize = 2;
/// Decoder input features: the previous normalized displacement.
pub const DECODER_FEATURES: usize = 1;

/// Names of the trainable tensors, in flattening order.
pub const TENSOR_ORDER: [&str; 8] =
    ["encoder.w_x", "encoder.w_h", "encoder.bias", "decoder.w_x", "decoder.w_h", "decoder.bias", "head.w", "head.b"];

/// Encoder and decoder LSTMs plus the linear read-out `hidden -> 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmWeights {
    pub hidden: usize,
    pub encoder: LstmLayer,
    pub decoder: LstmLayer,
    pub head_w: Vec<f64>,
    pub head_b: f64,
}

/// How the decoder is fed after its first step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderFeed {
    /// Step `k` receives the ground-truth target `k - 1`.
    TeacherForced,
    /// Step `k` receives the model's own output `k - 1`.
    Autoregressive,
}

impl LstmWeights {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            hidden,
            encoder: LstmLayer::zeros(ENCODER_FEATURES, hidden),
            decoder: LstmLayer::zeros(DECODER_FEATURES, hidden),
            head_w: vec![0.0; hidden],
            head_b: 0.0,
        }
    }

    pub fn random(hidden: usize, rng: &mut SeededRng) -> Self {
        let encoder = LstmLayer::random(ENCODER_FEATURES, hidden, rng);
        let decoder = LstmLayer::random(DECODER_FEATURES, hidden, rng);
        let bound = 1.0 / (hidden as f64).sqrt();
        let head_w = (0..hidden).map(|_| bound * (2.0 * rng.uniform() - 1.0)).collect();
        let head_b = bound * (2.0 * rng.uniform() - 1.0);
        Self { hidden, encoder, decoder, head_w, head_b }
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count() + self.hidden + 1
    }

    pub fn validate(&self) -> Result<(), RomError> {
        self.encoder.check_shapes()?;
        self.decoder.check_shapes()?;
        if self.encoder.input != ENCODER_FEATURES
            || self.decoder.input != DECODER_FEATURES
            || self.encoder.hidden != self.hidden
            || self.decoder.hidden != self.hidden
            || self.head_w.len() != self.hidden
        {
            return Err(RomError::DimensionMismatch(format!(
                "encoder {}->{}, decoder {}->{}, head {} for hidden size {}",
                self.encoder.input,
                self.encoder.hidden,
                self.decoder.input,
                self.decoder.hidden,
                self.head_w.len(),
                self.hidden
            )));
        }
        if !self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite())) {
            return Err(RomError::NonFinite("weights contain NaN or infinity".into()));
        }
        Ok(())
    }

    /// Tensors in [`TENSOR_ORDER`].
    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            &self.encoder.w_x,
            &self.encoder.w_h,
            &self.encoder.bias,
            &self.decoder.w_x,
            &self.decoder.w_h,
            &self.decoder.bias,
            &self.head_w,
            std::slice::from_ref(&self.head_b),
        ]
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            &mut self.encoder.w_x,
            &mut self.encoder.w_h,
            &mut self.encoder.bias,
            &mut self.decoder.w_x,
            &mut self.decoder.w_h,
            &mut self.decoder.bias,
            &mut self.head_w,
            std::slice::from_mut(&mut self.head_b),
        ]
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), RomError> {
        if flat.len() != self.param_count() {
            return Err(RomError::DimensionMismatch(format!(
                "{} flat parameters for a model with {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(())
    }

    fn head(&self, h: &[f64]) -> f64 {
        self.head_b + self.head_w.iter().zip(h).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Runs the encoder over a window and returns its final `(h, c)`.
pub fn encode(inputs: &[[f64; ENCODER_FEATURES]], w: &LstmWeights) -> Result<(Vec<f64>, Vec<f64>), RomError> {
    w.validate()?;
    if inputs.is_empty() {
        return Err(RomError::DimensionMismatch("empty encoder window".into()));
    }
    Ok(encode_unchecked(inputs, w))
}

pub(crate) fn encode_unchecked(inputs: &[[f64; ENCODER_FEATURES]], w: &LstmWeights) -> (Vec<f64>, Vec<f64>) {
    let mut h = vec![0.0; w.hidden];
    let mut c = vec![0.0; w.hidden];
    for x in inputs {
        let (h2, c2, _) = w.encoder.step_unchecked(x, &h, &c);
        h = h2;
        c = c2;
    }
    (h, c)
}

/// Autoregressive decode: step 0 is fed `first_input`, every later step the
/// previous read-out. Returns the `steps` read-outs.
pub fn decode(h: &[f64], c: &[f64], steps: usize, first_input: f64, w: &LstmWeights) -> Result<Vec<f64>, RomError> {
    if steps == 0 {
        return Err(RomError::DimensionMismatch("decoder needs at least one step".into()));
    }
    if h.len() != w.hidden || c.len() != w.hidden {
        return Err(RomError::DimensionMismatch(format!(
            "decoder state of size {}/{} for hidden size {}",
            h.len(),
            c.len(),
            w.hidden
        )));
    }
    Ok(decode_unchecked(h, c, steps, first_input, w))
}

pub(crate) fn decode_unchecked(h: &[f64], c: &[f64], steps: usize, first_input: f64, w: &LstmWeights) -> Vec<f64> {
    let mut h = h.to_vec();
    let mut c = c.to_vec();
    let mut input = first_input;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (h2, c2, _) = w.decoder.step_unchecked(&[input], &h, &c);
        h = h2;
        c = c2;
        input = w.head(&h);
        out.push(input);
    }
    out
}

/// Per-window record of a training forward pass.
#[derive(Debug, Clone)]
pub struct WindowTrace {
    /// Value fed to the decoder at each step.
    pub decoder_inputs: Vec<f64>,
    pub outputs: Vec<f64>,
    enc_caches: Vec<CellCache>,
    dec_caches: Vec<CellCache>,
}

/// Encodes `inputs` and decodes `targets.len()` steps under `feed`.
pub fn forward_window(
    inputs: &[[f64; ENCODER_FEATURES]],
    targets: &[f64],
    first_input: f64,
    feed: DecoderFeed,
    w: &LstmWeights,
) -> WindowTrace {
    let mut h = vec![0.0; w.hidden];
    let mut c = vec![0.0; w.hidden];
    let mut enc_caches = Vec::with_capacity(inputs.len());
    for x in inputs {
        let (h2, c2, cache) = w.encoder.step_cached(x, &h, &c);
        enc_caches.push(cache);
        h = h2;
        c = c2;
    }
    let mut dec_caches = Vec::with_capacity(targets.len());
    let mut decoder_inputs = Vec::with_capacity(targets.len());
    let mut outputs = Vec::with_capacity(targets.len());
    let mut input = first_input;
    for k in 0..targets.len() {
        decoder_inputs.push(input);
        let (h2, c2, cache) = w.decoder.step_cached(&[input], &h, &c);
        dec_caches.push(cache);
        h = h2;
        c = c2;
        let y = w.head(&h);
        outputs.push(y);
        input = match feed {
            DecoderFeed::TeacherForced => targets[k],
            DecoderFeed::Autoregressive => y,
        };
    }
    WindowTrace { decoder_inputs, outputs, enc_caches, dec_caches }
}

/// Mean squared error of one window.
pub fn window_loss(
    inputs: &[[f64; ENCODER_FEATURES]],
    targets: &[f64],
    first_input: f64,
    feed: DecoderFeed,
    w: &LstmWeights,
) -> f64 {
    let trace = forward_window(inputs, targets, first_input, feed, w);
    mse(&trace.outputs, targets)
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

/// Window MSE and its gradient, accumulated into `grad` with weight `scale`.
pub fn window_loss_grad(
    inputs: &[[f64; ENCODER_FEATURES]],
    targets: &[f64],
    first_input: f64,
    feed: DecoderFeed,
    w: &LstmWeights,
    scale: f64,
    grad: &mut LstmWeights,
) -> f64 {
    let trace = forward_window(inputs, targets, first_input, feed, w);
    let n = targets.len() as f64;
    let hs = w.hidden;

    let mut dh = vec![0.0; hs];
    let mut dc = vec![0.0; hs];
    // gradient w.r.t. the decoder input of the step after the current one
    let mut d_next_input = 0.0;
    for k in (0..targets.len()).rev() {
        let mut dy = scale * 2.0 * (trace.outputs[k] - targets[k]) / n;
        if feed == DecoderFeed::Autoregressive {
            dy += d_next_input;
        }
        let cache = &trace.dec_caches[k];
        let h_k: Vec<f64> = cache.gates.iter().skip(3 * hs).zip(&cache.tanh_c).map(|(o, t)| o * t).collect();
        grad.head_b += dy;
        for j in 0..hs {
            grad.head_w[j] += dy * h_k[j];
            dh[j] += dy * w.head_w[j];
        }
        let (dx, dh_prev, dc_prev) = w.decoder.backward(cache, &dh, &dc, &mut grad.decoder);
        d_next_input = dx[0];
        dh = dh_prev;
        dc = dc_prev;
    }
    for cache in trace.enc_caches.iter().rev() {
        let (_, dh_prev, dc_prev) = w.encoder.backward(cache, &dh, &dc, &mut grad.encoder);
        dh = dh_prev;
        dc = dc_prev;
    }
    mse(&trace.outputs, targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_window(rng: &mut SeededRng, len: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
        let inputs = (0..len).map(|_| [rng.uniform(), rng.uniform()]).collect();
        let targets = (0..len).map(|_| rng.uniform()).collect();
        (inputs, targets)
    }

    #[test]
    fn zero_weights_encode_to_zero() {
        let w = LstmWeights::zeros(4);
        let (h, c) = encode(&[[0.3, 0.9], [1.0, -2.0]], &w).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
        assert_eq!(decode(&h, &c, 6, 0.0, &w).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn encoder_is_order_sensitive() {
        let mut rng = SeededRng::new(17);
        let w = LstmWeights::random(5, &mut rng);
        let seq = [[0.0, 0.5], [0.3, 0.5], [0.9, 0.5]];
        let rev = [seq[2], seq[1], seq[0]];
        assert_ne!(encode(&seq, &w).unwrap(), encode(&rev, &w).unwrap());
    }

    #[test]
    fn single_step_window_is_one_cell() {
        let mut rng = SeededRng::new(2);
        let w = LstmWeights::random(3, &mut rng);
        let x = [0.25, 0.75];
        let direct = w.encoder.step(&x, &[0.0; 3], &[0.0; 3]).unwrap();
        assert_eq!(encode(&[x], &w).unwrap(), direct);
    }

    #[test]
    fn single_decode_step_is_cell_plus_head() {
        let mut rng = SeededRng::new(4);
        let w = LstmWeights::random(3, &mut rng);
        let (h0, c0) = (vec![0.1, -0.2, 0.3], vec![0.5, 0.0, -0.5]);
        let (h1, _) = w.decoder.step(&[0.7], &h0, &c0).unwrap();
        let y = w.head_b + w.head_w.iter().zip(&h1).map(|(a, b)| a * b).sum::<f64>();
        assert_eq!(decode(&h0, &c0, 1, 0.7, &w).unwrap(), vec![y]);
        assert!(decode(&h0, &c0, 0, 0.7, &w).is_err());
    }

    #[test]
    fn teacher_forcing_feeds_targets() {
        let mut rng = SeededRng::new(8);
        let w = LstmWeights::random(3, &mut rng);
        let (inputs, targets) = random_window(&mut rng, 5);
        let tf = forward_window(&inputs, &targets, 0.0, DecoderFeed::TeacherForced, &w);
        let mut expected = vec![0.0];
        expected.extend_from_slice(&targets[..4]);
        assert_eq!(tf.decoder_inputs, expected);

        let ar = forward_window(&inputs, &targets, 0.0, DecoderFeed::Autoregressive, &w);
        let mut expected = vec![0.0];
        expected.extend_from_slice(&ar.outputs[..4]);
        assert_eq!(ar.decoder_inputs, expected);
        let (h, c) = encode(&inputs, &w).unwrap();
        assert_eq!(decode(&h, &c, 5, 0.0, &w).unwrap(), ar.outputs);
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = SeededRng::new(5);
        let w = LstmWeights::random(3, &mut rng);
        let flat = w.to_flat();
        assert_eq!(flat.len(), w.param_count());
        let mut z = LstmWeights::zeros(3);
        z.set_flat(&flat).unwrap();
        assert_eq!(z, w);
        assert!(z.set_flat(&flat[1..]).is_err());
    }

    fn check_gradients(feed: DecoderFeed, seed: u64) {
        let mut rng = SeededRng::new(seed);
        let w = LstmWeights::random(3, &mut rng);
        let (inputs, targets) = random_window(&mut rng, 4);
        let mut grad = LstmWeights::zeros(3);
        window_loss_grad(&inputs, &targets, 0.0, feed, &w, 1.0, &mut grad);
        let analytic = grad.to_flat();
        let base = w.to_flat();
        let step = 1e-5;
        for i in 0..base.len() {
            let mut probe = w.clone();
            let mut p = base.clone();
            p[i] += step;
            probe.set_flat(&p).unwrap();
            let up = window_loss(&inputs, &targets, 0.0, feed, &probe);
            p[i] -= 2.0 * step;
            probe.set_flat(&p).unwrap();
            let down = window_loss(&inputs, &targets, 0.0, feed, &probe);
            let numeric = (up - down) / (2.0 * step);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic[i] - numeric).abs() / denom < 1e-4,
                "param {i}: analytic {} numeric {numeric}",
                analytic[i]
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..3 {
            check_gradients(DecoderFeed::TeacherForced, seed);
            check_gradients(DecoderFeed::Autoregressive, seed);
        }
    }
}
