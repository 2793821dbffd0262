//! Layer primitives with hand-written backward passes.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{axpy, dot, Mat};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Exact GELU, `x · Φ(x)`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    cdf + x * pdf
}

/// Shape of a 1-D convolution with `same` padding.
#[derive(Debug, Clone, Copy)]
pub struct ConvShape {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub dilation: usize,
}

impl ConvShape {
    pub fn pointwise(in_ch: usize, out_ch: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            kernel: 1,
            dilation: 1,
        }
    }

    pub fn weight_shape(&self) -> [usize; 3] {
        [self.out_ch, self.in_ch, self.kernel]
    }

    /// Signed input offset of kernel tap `j`.
    fn offset(&self, j: usize) -> isize {
        let pad = (self.kernel - 1) * self.dilation / 2;
        (j * self.dilation) as isize - pad as isize
    }
}

/// Output index range `[lo, hi)` for which `t + off` stays inside `0..len`.
fn valid_range(len: usize, off: isize) -> (usize, usize) {
    let lo = (-off).max(0) as usize;
    let hi = (len as isize - off).clamp(0, len as isize) as usize;
    (lo.min(hi), hi)
}

/// `y[o, t] = b[o] + Σ_i Σ_j w[o, i, j] · x[i, t + j·dil − pad]`, zero
/// padded so that the output keeps the input length.
pub fn conv1d(x: &Mat, w: &[f64], b: &[f64], s: ConvShape) -> Result<Mat> {
    if x.rows() != s.in_ch {
        return Err(Error::dim(format!(
            "conv expects {} input channels, got {}",
            s.in_ch,
            x.rows()
        )));
    }
    let t = x.cols();
    let mut y = Mat::zeros(s.out_ch, t);
    for o in 0..s.out_ch {
        let yr = y.row_mut(o);
        yr.fill(b[o]);
        for i in 0..s.in_ch {
            let xr = x.row(i);
            for j in 0..s.kernel {
                let wv = w[(o * s.in_ch + i) * s.kernel + j];
                if wv == 0.0 {
                    continue;
                }
                let off = s.offset(j);
                let (lo, hi) = valid_range(t, off);
                if lo < hi {
                    let src = &xr[(lo as isize + off) as usize..(hi as isize + off) as usize];
                    axpy(wv, src, &mut yr[lo..hi]);
                }
            }
        }
    }
    Ok(y)
}

/// Accumulates weight/bias gradients and returns `∂L/∂x`.
pub fn conv1d_backward(x: &Mat, dy: &Mat, w: &[f64], s: ConvShape, dw: &mut [f64], db: &mut [f64]) -> Mat {
    let t = x.cols();
    let mut dx = Mat::zeros(s.in_ch, t);
    for o in 0..s.out_ch {
        let dyr = dy.row(o);
        db[o] += dyr.iter().sum::<f64>();
        for i in 0..s.in_ch {
            for j in 0..s.kernel {
                let off = s.offset(j);
                let (lo, hi) = valid_range(t, off);
                if lo >= hi {
                    continue;
                }
                let (slo, shi) = ((lo as isize + off) as usize, (hi as isize + off) as usize);
                let widx = (o * s.in_ch + i) * s.kernel + j;
                dw[widx] += dot(&dyr[lo..hi], &x.row(i)[slo..shi]);
                axpy(w[widx], &dyr[lo..hi], &mut dx.row_mut(i)[slo..shi]);
            }
        }
    }
    dx
}

/// Per-channel (depthwise) same-padded convolution, weight shape `[c, 1, k]`.
pub fn depthwise_conv1d(x: &Mat, w: &[f64], b: &[f64], kernel: usize) -> Mat {
    let t = x.cols();
    let s = ConvShape {
        in_ch: 1,
        out_ch: 1,
        kernel,
        dilation: 1,
    };
    let mut y = Mat::zeros(x.rows(), t);
    for c in 0..x.rows() {
        let yr = y.row_mut(c);
        yr.fill(b[c]);
        for j in 0..kernel {
            let off = s.offset(j);
            let (lo, hi) = valid_range(t, off);
            if lo < hi {
                let src = &x.row(c)[(lo as isize + off) as usize..(hi as isize + off) as usize];
                axpy(w[c * kernel + j], src, &mut yr[lo..hi]);
            }
        }
    }
    y
}

pub fn depthwise_conv1d_backward(x: &Mat, dy: &Mat, w: &[f64], kernel: usize, dw: &mut [f64], db: &mut [f64]) -> Mat {
    let t = x.cols();
    let s = ConvShape {
        in_ch: 1,
        out_ch: 1,
        kernel,
        dilation: 1,
    };
    let mut dx = Mat::zeros(x.rows(), t);
    for c in 0..x.rows() {
        let dyr = dy.row(c);
        db[c] += dyr.iter().sum::<f64>();
        for j in 0..kernel {
            let off = s.offset(j);
            let (lo, hi) = valid_range(t, off);
            if lo >= hi {
                continue;
            }
            let (slo, shi) = ((lo as isize + off) as usize, (hi as isize + off) as usize);
            dw[c * kernel + j] += dot(&dyr[lo..hi], &x.row(c)[slo..shi]);
            axpy(w[c * kernel + j], &dyr[lo..hi], &mut dx.row_mut(c)[slo..shi]);
        }
    }
    dx
}

/// `W · x + b` for a single vector; `w` is `out × in` row-major.
pub fn matvec(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(o, &bo)| bo + dot(&w[o * n_in..(o + 1) * n_in], x))
        .collect()
}

/// Non-padded average pooling along time.
pub fn avg_pool(h: &Mat, window: usize, stride: usize) -> Result<Mat> {
    let t = h.cols();
    if t < window {
        return Err(Error::Degenerate(format!(
            "sequence of {t} frames is shorter than the {window}-frame pooling window"
        )));
    }
    let l = (t - window) / stride + 1;
    let mut out = Mat::zeros(h.rows(), l);
    for r in 0..h.rows() {
        let hr = h.row(r);
        for (k, v) in out.row_mut(r).iter_mut().enumerate() {
            *v = hr[k * stride..k * stride + window].iter().sum::<f64>() / window as f64;
        }
    }
    Ok(out)
}

pub fn avg_pool_backward(dout: &Mat, t: usize, window: usize, stride: usize) -> Mat {
    let mut dh = Mat::zeros(dout.rows(), t);
    let inv = 1.0 / window as f64;
    for r in 0..dout.rows() {
        let dr = dout.row(r).to_vec();
        let row = dh.row_mut(r);
        for (k, g) in dr.into_iter().enumerate() {
            for v in &mut row[k * stride..k * stride + window] {
                *v += g * inv;
            }
        }
    }
    dh
}

/// Endpoint-aligned linear interpolation of `p` onto `target_len` points.
pub fn upsample_linear(p: &[f64], target_len: usize) -> Result<Vec<f64>> {
    if p.len() < 2 || target_len < 2 {
        return Err(Error::Degenerate(format!(
            "linear upsampling needs at least 2 source and target points, got {} -> {target_len}",
            p.len()
        )));
    }
    Ok((0..target_len)
        .map(|i| {
            let (lo, frac) = upsample_coord(i, p.len(), target_len);
            if frac == 0.0 {
                p[lo]
            } else {
                p[lo] + (p[lo + 1] - p[lo]) * frac
            }
        })
        .collect())
}

/// Source index and interpolation weight of output point `i`.
fn upsample_coord(i: usize, src_len: usize, target_len: usize) -> (usize, f64) {
    let s = (i * (src_len - 1)) as f64 / (target_len - 1) as f64;
    let lo = (s.floor() as usize).min(src_len - 1);
    (lo, s - lo as f64)
}

pub fn upsample_linear_backward(dout: &[f64], src_len: usize) -> Vec<f64> {
    let mut dp = vec![0.0; src_len];
    for (i, &g) in dout.iter().enumerate() {
        let (lo, frac) = upsample_coord(i, src_len, dout.len());
        if frac == 0.0 {
            dp[lo] += g;
        } else {
            dp[lo] += g * (1.0 - frac);
            dp[lo + 1] += g * frac;
        }
    }
    dp
}

/// Inverted-dropout multipliers (`0` or `1 / (1 − p)`), or `None` when
/// dropout is inactive.
pub fn dropout_mask(len: usize, p: f64, rng: Option<&mut Rng>) -> Option<Vec<f64>> {
    let rng = rng?;
    if p == 0.0 {
        return None;
    }
    let keep = 1.0 / (1.0 - p);
    Some(
        (0..len)
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect(),
    )
}

pub fn apply_mask(m: &mut Mat, mask: &Option<Vec<f64>>) {
    if let Some(mask) = mask {
        for (v, k) in m.data_mut().iter_mut().zip(mask) {
            *v *= k;
        }
    }
}
