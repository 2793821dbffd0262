use crate::error::{Error, Result};
use crate::net::{ModelParams, Tensor};

/// AdamW hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

impl AdamW {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.weight_decay >= 0.0
            && self.weight_decay.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Weight decay reaches matrices and conv kernels, never bias vectors.
pub fn decays(t: &Tensor) -> bool {
    t.shape.len() >= 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step_count: u64,
    pub hyper: AdamW,
    first: ModelParams,
    second: ModelParams,
}

impl OptimizerState {
    pub fn new(params: &ModelParams, hyper: AdamW) -> Self {
        Self {
            step_count: 0,
            hyper,
            first: params.zeros_like(),
            second: params.zeros_like(),
        }
    }

    pub fn first_moment(&self) -> &ModelParams {
        &self.first
    }

    pub fn second_moment(&self) -> &ModelParams {
        &self.second
    }
}

/// One bias-corrected AdamW update with decoupled weight decay:
///
/// ```text
/// m ← β1·m + (1−β1)·g        v ← β2·v + (1−β2)·g²
/// θ ← θ − lr·( m̂ / (√v̂ + ε) + wd·θ )
/// ```
///
/// Nothing is modified when an error is returned.
pub fn adamw_step(params: &mut ModelParams, grads: &ModelParams, state: &mut OptimizerState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::dim(format!(
            "{} parameter tensors, {} gradients, {} optimizer slots",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    for (p, g) in params.tensors().iter().zip(grads.tensors()) {
        if p.name != g.name || p.shape != g.shape {
            return Err(Error::dim(format!(
                "gradient {} {:?} does not match parameter {} {:?}",
                g.name, g.shape, p.name, p.shape
            )));
        }
        if g.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(g.name.clone()));
        }
    }

    let h = state.hyper;
    state.step_count += 1;
    let step = state.step_count as i32;
    let c1 = 1.0 - h.beta1.powi(step);
    let c2 = 1.0 - h.beta2.powi(step);
    let tensors = params
        .tensors_mut()
        .iter_mut()
        .zip(grads.tensors())
        .zip(state.first.tensors_mut().iter_mut().zip(state.second.tensors_mut()));
    for ((p, g), (m, v)) in tensors {
        let wd = if decays(p) { h.weight_decay } else { 0.0 };
        for i in 0..p.data.len() {
            let gi = g.data[i];
            m.data[i] = h.beta1 * m.data[i] + (1.0 - h.beta1) * gi;
            v.data[i] = h.beta2 * v.data[i] + (1.0 - h.beta2) * gi * gi;
            let m_hat = m.data[i] / c1;
            let v_hat = v.data[i] / c2;
            p.data[i] -= h.lr * (m_hat / (v_hat.sqrt() + h.epsilon) + wd * p.data[i]);
        }
    }
    Ok(())
}
