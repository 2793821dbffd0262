//! Bidirectional LSTM.
//!
//! Per direction, with gates stacked as `[i; f; g; o]` in a single
//! `4H × D` input matrix, `4H × H` recurrent matrix and `4H` bias:
//!
//! ```text
//! z_t = W_ih · x_t + W_hh · h_{t−1} + b
//! i = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
//! c_t = f ⊙ c_{t−1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```
//!
//! with `h_{−1} = c_{−1} = 0`. The backward direction runs the same
//! recurrence from `t = T−1` down to `0` with its own weights. Output row
//! block `[0, H)` is the forward hidden state, `[H, 2H)` the backward one.

use super::ops::sigmoid;
use crate::tensor::{axpy, dot, Mat};

pub struct LstmWeights<'a> {
    pub w_ih: &'a [f64],
    pub w_hh: &'a [f64],
    pub bias: &'a [f64],
    pub input: usize,
    pub hidden: usize,
}

pub struct LstmGrads<'a> {
    pub w_ih: &'a mut [f64],
    pub w_hh: &'a mut [f64],
    pub bias: &'a mut [f64],
}

/// Activations of one direction, indexed by real time `t`.
#[derive(Debug, Clone)]
pub struct DirCache {
    reverse: bool,
    /// `T × 4H`: i, f, g, o after their nonlinearities
    gates: Mat,
    /// `T × H`
    cell: Mat,
    /// `T × H`
    hidden: Mat,
}

impl DirCache {
    /// `T × H` hidden states.
    pub fn hidden(&self) -> &Mat {
        &self.hidden
    }
}

fn steps(t: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..t).rev())
    } else {
        Box::new(0..t)
    }
}

/// Runs one direction over `xs` (`T × D`, time-major).
pub fn lstm_direction(xs: &Mat, w: &LstmWeights<'_>, reverse: bool) -> DirCache {
    let (t_len, h) = (xs.rows(), w.hidden);
    let mut gates = Mat::zeros(t_len, 4 * h);
    let mut cell = Mat::zeros(t_len, h);
    let mut hidden = Mat::zeros(t_len, h);
    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    let mut z = vec![0.0; 4 * h];
    for t in steps(t_len, reverse) {
        let x = xs.row(t);
        for (r, zr) in z.iter_mut().enumerate() {
            *zr =
                w.bias[r] + dot(&w.w_ih[r * w.input..(r + 1) * w.input], x) + dot(&w.w_hh[r * h..(r + 1) * h], &h_prev);
        }
        let g_row = gates.row_mut(t);
        for k in 0..h {
            g_row[k] = sigmoid(z[k]);
            g_row[h + k] = sigmoid(z[h + k]);
            g_row[2 * h + k] = z[2 * h + k].tanh();
            g_row[3 * h + k] = sigmoid(z[3 * h + k]);
        }
        let g_row = gates.row(t).to_vec();
        for k in 0..h {
            let c = g_row[h + k] * c_prev[k] + g_row[k] * g_row[2 * h + k];
            c_prev[k] = c;
            h_prev[k] = g_row[3 * h + k] * c.tanh();
        }
        cell.row_mut(t).copy_from_slice(&c_prev);
        hidden.row_mut(t).copy_from_slice(&h_prev);
    }
    DirCache {
        reverse,
        gates,
        cell,
        hidden,
    }
}

/// Backpropagates `dh_out` (`T × H`, gradient w.r.t. each emitted hidden
/// state) through time. Accumulates into `grads` and into `dxs` (`T × D`).
pub fn lstm_direction_backward(
    xs: &Mat,
    w: &LstmWeights<'_>,
    cache: &DirCache,
    dh_out: &Mat,
    grads: LstmGrads<'_>,
    dxs: &mut Mat,
) {
    let (t_len, h, d) = (xs.rows(), w.hidden, w.input);
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    let zeros = vec![0.0; h];
    let order: Vec<usize> = steps(t_len, cache.reverse).collect();
    for (s, &t) in order.iter().enumerate().rev() {
        let (h_prev, c_prev) = if s == 0 {
            (&zeros[..], &zeros[..])
        } else {
            let p = order[s - 1];
            (cache.hidden.row(p), cache.cell.row(p))
        };
        let g = cache.gates.row(t);
        let c = cache.cell.row(t);
        let dh_t = dh_out.row(t);
        for k in 0..h {
            let (i, f, gg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
            let dh = dh_t[k] + dh_next[k];
            let tc = c[k].tanh();
            let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
            dz[k] = dc * gg * i * (1.0 - i);
            dz[h + k] = dc * c_prev[k] * f * (1.0 - f);
            dz[2 * h + k] = dc * i * (1.0 - gg * gg);
            dz[3 * h + k] = dh * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        let x = xs.row(t);
        dh_next.fill(0.0);
        let dx = dxs.row_mut(t);
        for (r, &dzr) in dz.iter().enumerate() {
            if dzr == 0.0 {
                continue;
            }
            grads.bias[r] += dzr;
            axpy(dzr, x, &mut grads.w_ih[r * d..(r + 1) * d]);
            axpy(dzr, h_prev, &mut grads.w_hh[r * h..(r + 1) * h]);
            axpy(dzr, &w.w_ih[r * d..(r + 1) * d], dx);
            axpy(dzr, &w.w_hh[r * h..(r + 1) * h], &mut dh_next);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_step_hand_recurrence() {
        // D = 1, H = 1; gates z = w_ih x + w_hh h + b
        let w_ih = [0.5, -0.3, 0.8, 0.2];
        let w_hh = [0.1, 0.4, -0.6, 0.7];
        let bias = [0.0, 1.0, 0.1, -0.2];
        let w = LstmWeights {
            w_ih: &w_ih,
            w_hh: &w_hh,
            bias: &bias,
            input: 1,
            hidden: 1,
        };
        let xs = Mat::from_vec(2, 1, vec![1.0, -2.0]).unwrap();
        let cache = lstm_direction(&xs, &w, false);

        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let step = |x: f64, h: f64, c: f64| {
            let i = s(w_ih[0] * x + w_hh[0] * h + bias[0]);
            let f = s(w_ih[1] * x + w_hh[1] * h + bias[1]);
            let g = (w_ih[2] * x + w_hh[2] * h + bias[2]).tanh();
            let o = s(w_ih[3] * x + w_hh[3] * h + bias[3]);
            let c = f * c + i * g;
            (o * c.tanh(), c)
        };
        let (h0, c0) = step(1.0, 0.0, 0.0);
        let (h1, _) = step(-2.0, h0, c0);
        assert!((cache.hidden.get(0, 0) - h0).abs() < 1e-14);
        assert!((cache.hidden.get(1, 0) - h1).abs() < 1e-14);

        // reverse direction starts from the last frame
        let rev = lstm_direction(&xs, &w, true);
        let (r1, rc1) = step(-2.0, 0.0, 0.0);
        let (r0, _) = step(1.0, r1, rc1);
        assert!((rev.hidden.get(1, 0) - r1).abs() < 1e-14);
        assert!((rev.hidden.get(0, 0) - r0).abs() < 1e-14);
    }

    #[test]
    fn zero_input_zero_weights_stay_zero() {
        let h = 3;
        let w_ih = vec![0.0; 4 * h * 2];
        let w_hh = vec![0.0; 4 * h * h];
        let mut bias = vec![0.0; 4 * h];
        bias[h..2 * h].fill(1.0);
        let w = LstmWeights {
            w_ih: &w_ih,
            w_hh: &w_hh,
            bias: &bias,
            input: 2,
            hidden: h,
        };
        let xs = Mat::zeros(5, 2);
        let cache = lstm_direction(&xs, &w, false);
        assert!(cache.hidden.data().iter().all(|&v| v == 0.0));
        assert!(cache.cell.data().iter().all(|&v| v == 0.0));
    }
}
