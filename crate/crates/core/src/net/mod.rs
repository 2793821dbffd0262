//! The decoder network: configuration, parameters, forward pass and
//! gradients, and the checkpoint format.

pub mod checkpoint;
pub mod config;
pub mod lstm;
pub mod model;
pub mod ops;
pub mod params;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{count_params, param_layout, BranchFlags, ModelConfig};
pub use model::{
    avg_pool_forward, batch_loss, bilstm_forward, bm_encoder_forward, concat_features, ds_fusion_forward, head_forward,
    model_forward, multiscale_conv_forward, param_gradients, param_gradients_serial, spatial_attention_forward,
    Example, MODEL_FRAME_RATE_HZ,
};
pub use params::{init_params, ModelParams, Tensor};

use crate::error::Result;

/// Per-frame speech probabilities at a declared frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilitySequence {
    pub frame_rate_hz: f64,
    pub values: Vec<f64>,
}

impl ProbabilitySequence {
    pub fn new(frame_rate_hz: f64, values: Vec<f64>) -> Self {
        Self { frame_rate_hz, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Endpoint-aligned linear upsampling to `target_len` frames. The frame
/// rate scales with the length so the covered span is unchanged.
pub fn upsample_linear(p: &ProbabilitySequence, target_len: usize) -> Result<ProbabilitySequence> {
    let values = ops::upsample_linear(&p.values, target_len)?;
    let rate = p.frame_rate_hz * (target_len - 1) as f64 / (p.len() - 1) as f64;
    Ok(ProbabilitySequence::new(rate, values))
}
