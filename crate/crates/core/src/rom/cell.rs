use serde::{Deserialize, Serialize};

use super::RomError;
use crate::rng::SeededRng;

/// Single-layer LSTM weights. Gate rows are stacked as `[input; forget; cell; output]`,
/// each block `hidden` rows tall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub input: usize,
    pub hidden: usize,
    /// `4H x input`, row-major.
    pub w_x: Vec<f64>,
    /// `4H x H`, row-major.
    pub w_h: Vec<f64>,
    /// `4H`.
    pub bias: Vec<f64>,
}

/// Values saved by a forward step for the backward pass.
#[derive(Debug, Clone)]
pub struct CellCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-activation gates, `[i; f; g; o]`.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            input,
            hidden,
            w_x: vec![0.0; 4 * hidden * input],
            w_h: vec![0.0; 4 * hidden * hidden],
            bias: vec![0.0; 4 * hidden],
        }
    }

    /// Every entry uniform in `±1/sqrt(hidden)`.
    pub fn random(input: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut draw = |n: usize| (0..n).map(|_| bound * (2.0 * rng.uniform() - 1.0)).collect::<Vec<_>>();
        let w_x = draw(4 * hidden * input);
        let w_h = draw(4 * hidden * hidden);
        let bias = draw(4 * hidden);
        Self { input, hidden, w_x, w_h, bias }
    }

    pub fn param_count(&self) -> usize {
        self.w_x.len() + self.w_h.len() + self.bias.len()
    }

    pub(crate) fn check_shapes(&self) -> Result<(), RomError> {
        let h4 = 4 * self.hidden;
        if self.w_x.len() != h4 * self.input || self.w_h.len() != h4 * self.hidden || self.bias.len() != h4 {
            return Err(RomError::DimensionMismatch(format!(
                "LSTM layer ({} -> {}) has tensors of length {}, {}, {}",
                self.input,
                self.hidden,
                self.w_x.len(),
                self.w_h.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    fn check_step(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<(), RomError> {
        if x.len() != self.input || h.len() != self.hidden || c.len() != self.hidden {
            return Err(RomError::DimensionMismatch(format!(
                "cell expects x:{} h:{} c:{}, got x:{} h:{} c:{}",
                self.input,
                self.hidden,
                self.hidden,
                x.len(),
                h.len(),
                c.len()
            )));
        }
        Ok(())
    }

    /// One LSTM step: `c' = f*c + i*g`, `h' = o*tanh(c')`.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>), RomError> {
        self.check_step(x, h, c)?;
        let (h_new, c_new, _) = self.step_unchecked(x, h, c);
        Ok((h_new, c_new))
    }

    pub(crate) fn step_unchecked(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hs = self.hidden;
        let mut gates = self.bias.clone();
        for (r, a) in gates.iter_mut().enumerate() {
            let wx = &self.w_x[r * self.input..(r + 1) * self.input];
            let wh = &self.w_h[r * hs..(r + 1) * hs];
            *a += wx.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            *a += wh.iter().zip(h).map(|(w, v)| w * v).sum::<f64>();
        }
        for (r, a) in gates.iter_mut().enumerate() {
            *a = if (2 * hs..3 * hs).contains(&r) { a.tanh() } else { sigmoid(*a) };
        }
        let mut c_new = vec![0.0; hs];
        let mut h_new = vec![0.0; hs];
        for k in 0..hs {
            let (i, f, g, o) = (gates[k], gates[hs + k], gates[2 * hs + k], gates[3 * hs + k]);
            c_new[k] = f * c[k] + i * g;
            h_new[k] = o * c_new[k].tanh();
        }
        (h_new, c_new, gates)
    }

    pub(crate) fn step_cached(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>, CellCache) {
        let (h_new, c_new, gates) = self.step_unchecked(x, h, c);
        let tanh_c = c_new.iter().map(|v| v.tanh()).collect();
        let cache = CellCache { x: x.to_vec(), h_prev: h.to_vec(), c_prev: c.to_vec(), gates, tanh_c };
        (h_new, c_new, cache)
    }

    /// Backpropagates through one step. `dh` and `dc` are the gradients
    /// flowing into this step's outputs; weight gradients accumulate into
    /// `grad`. Returns `(dx, dh_prev, dc_prev)`.
    pub(crate) fn backward(
        &self,
        cache: &CellCache,
        dh: &[f64],
        dc: &[f64],
        grad: &mut LstmLayer,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hs = self.hidden;
        let g = &cache.gates;
        let mut da = vec![0.0; 4 * hs];
        let mut dc_prev = vec![0.0; hs];
        for k in 0..hs {
            let (i, f, gg, o) = (g[k], g[hs + k], g[2 * hs + k], g[3 * hs + k]);
            let tc = cache.tanh_c[k];
            let d_o = dh[k] * tc;
            let dc_total = dc[k] + dh[k] * o * (1.0 - tc * tc);
            da[k] = dc_total * gg * i * (1.0 - i);
            da[hs + k] = dc_total * cache.c_prev[k] * f * (1.0 - f);
            da[2 * hs + k] = dc_total * i * (1.0 - gg * gg);
            da[3 * hs + k] = d_o * o * (1.0 - o);
            dc_prev[k] = dc_total * f;
        }
        let mut dx = vec![0.0; self.input];
        let mut dh_prev = vec![0.0; hs];
        for (r, &d) in da.iter().enumerate() {
            grad.bias[r] += d;
            let row_x = r * self.input;
            for j in 0..self.input {
                grad.w_x[row_x + j] += d * cache.x[j];
                dx[j] += self.w_x[row_x + j] * d;
            }
            let row_h = r * hs;
            for j in 0..hs {
                grad.w_h[row_h + j] += d * cache.h_prev[j];
                dh_prev[j] += self.w_h[row_h + j] * d;
            }
        }
        (dx, dh_prev, dc_prev)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_zero_state() {
        let layer = LstmLayer::zeros(2, 4);
        let (h, c) = layer.step(&[0.3, -1.0], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn zero_weights_unit_cell() {
        let layer = LstmLayer::zeros(1, 3);
        let (h, c) = layer.step(&[5.0], &[0.2; 3], &[1.0; 3]).unwrap();
        assert_eq!(c, vec![0.5; 3]);
        let expected = 0.5 * 0.5f64.tanh();
        assert!(h.iter().all(|&v| (v - expected).abs() < 1e-15));
    }

    #[test]
    fn dimension_mismatch() {
        let layer = LstmLayer::zeros(2, 3);
        assert!(matches!(layer.step(&[1.0], &[0.0; 3], &[0.0; 3]), Err(RomError::DimensionMismatch(_))));
        assert!(matches!(layer.step(&[1.0, 2.0], &[0.0; 2], &[0.0; 3]), Err(RomError::DimensionMismatch(_))));
    }

    #[test]
    fn random_init_bounds() {
        let mut rng = SeededRng::new(0);
        let layer = LstmLayer::random(2, 5, &mut rng);
        let b = 1.0 / 5f64.sqrt();
        assert!(layer.w_x.iter().chain(&layer.w_h).chain(&layer.bias).all(|v| v.abs() <= b));
        assert_eq!(layer.param_count(), 20 * 2 + 20 * 5 + 20);
    }
}
