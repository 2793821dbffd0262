//! Speech-activity decoding from MEG-like multichannel recordings.
//!
//! The crate covers the whole pipeline: recording formats and
//! preprocessing ([`data`]), training windows ([`windowing`]), the
//! multi-branch decoder network with analytic gradients ([`net`]), the
//! AdamW training loop with best-checkpoint retention ([`train`]),
//! threshold sweeps and metrics ([`eval`]), a synthetic session generator
//! ([`synth`]) and the end-to-end driver used by the command line
//! ([`pipeline`]).

pub mod data;
pub mod error;
pub mod eval;
pub mod kv;
pub mod net;
pub mod pipeline;

pub use error::{Error, Result};
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod train;
pub mod windowing;
