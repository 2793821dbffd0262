use std::collections::HashMap;

use rand::Rng as _;

use super::config::{param_layout, Init, ModelConfig};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// Named tensors in a fixed order. Gradients use the same container.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParams {
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ModelParams {
    pub fn from_tensors(tensors: Vec<Tensor>) -> Result<Self> {
        let mut index = HashMap::with_capacity(tensors.len());
        for (i, t) in tensors.iter().enumerate() {
            if t.shape.iter().product::<usize>() != t.data.len() {
                return Err(Error::dim(format!(
                    "tensor {} has shape {:?} but {} values",
                    t.name,
                    t.shape,
                    t.data.len()
                )));
            }
            if index.insert(t.name.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate tensor {}", t.name)));
            }
        }
        Ok(Self { tensors, index })
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.index
            .get(name)
            .map(|&i| &self.tensors[i])
            .ok_or_else(|| Error::dim(format!("missing tensor {name}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        match self.index.get(name) {
            Some(&i) => Ok(&mut self.tensors[i]),
            None => Err(Error::dim(format!("missing tensor {name}"))),
        }
    }

    /// Data of `name`, checked against the expected shape.
    pub fn data(&self, name: &str, shape: &[usize]) -> Result<&[f64]> {
        let t = self.get(name)?;
        if t.shape != shape {
            return Err(Error::dim(format!(
                "tensor {name} has shape {:?}, expected {shape:?}",
                t.shape
            )));
        }
        Ok(&t.data)
    }

    /// Disjoint mutable views of several tensors at once.
    pub(crate) fn grads_mut<const N: usize>(&mut self, names: [&str; N]) -> [&mut [f64]; N] {
        let idx = names.map(|n| self.index[n]);
        self.tensors
            .get_disjoint_mut(idx)
            .expect("distinct tensor names")
            .map(|t| t.data.as_mut_slice())
    }

    /// Same names and shapes, all zeros.
    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.name.clone(), t.shape.clone()))
                .collect(),
            index: self.index.clone(),
        }
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn add_scaled(&mut self, alpha: f64, other: &ModelParams) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            debug_assert_eq!(a.name, b.name);
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += alpha * y;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Rounds every value to `f32` precision, the checkpoint storage format.
    pub fn round_to_f32(&mut self) {
        for t in &mut self.tensors {
            for v in &mut t.data {
                *v = f64::from(*v as f32);
            }
        }
    }
}

/// Deterministic initialisation from `(cfg, seed)`.
///
/// Weights are uniform in `±sqrt(6 / (fan_in + fan_out))`; biases are zero
/// except the LSTM forget gates, which start at 1.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    let mut rng = rng::stream(seed, "init", 0);
    let tensors = param_layout(cfg)
        .into_iter()
        .map(|spec| {
            let n = spec.numel();
            let data = match spec.init {
                Init::Uniform { fan_in, fan_out } => {
                    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    (0..n).map(|_| rng.random_range(-a..a)).collect()
                }
                Init::Zeros => vec![0.0; n],
                Init::LstmBias { hidden } => {
                    let mut b = vec![0.0; n];
                    b[hidden..2 * hidden].fill(1.0);
                    b
                }
            };
            Tensor {
                name: spec.name,
                shape: spec.shape,
                data,
            }
        })
        .collect();
    ModelParams::from_tensors(tensors)
}
