//! Browser demo. A page can generate a synthetic session, train a small
//! decoder on it one epoch at a time, and sweep the decision threshold
//! over a held-out session.
//!
//! [`Workbench`] holds the state and is plain Rust; [`Demo`] wraps it for
//! JavaScript.

use std::collections::BTreeMap;

use mebm::data::{preprocess_session, ChannelKind, LabelVector};
use mebm::eval::{apply_threshold, sweep_thresholds};
use mebm::net::{init_params, ModelConfig, ModelParams, ProbabilitySequence};
use mebm::pipeline::{predict_session, session_windows, Session};
use mebm::synth::{generate_session, SynthConfig};
use mebm::train::{self, AdamW, OptimizerState, TrainSet};
use mebm::windowing::{LabelMode, WindowingConfig};
use mebm::Result;
use wasm_bindgen::prelude::*;

pub const TRAIN_SECONDS: f64 = 120.0;
pub const TEST_SECONDS: f64 = 60.0;

/// Model small enough to train interactively.
pub fn demo_model() -> ModelConfig {
    ModelConfig {
        c_in: 4,
        d: 8,
        n_bm: 1,
        n_ms: 2,
        ms_kernel_sizes: vec![3, 5],
        lstm_hidden: 8,
        ..ModelConfig::default()
    }
}

fn synth_config(seed: u64, snr: f64, duration_s: f64) -> SynthConfig {
    SynthConfig {
        n_channels: 4,
        n_informative: 2,
        duration_s,
        sample_rate_hz: 100.0,
        snr,
        seed,
        ..SynthConfig::default()
    }
}

fn make_session(id: &str, cfg: &SynthConfig, windowing: &WindowingConfig) -> Result<Session> {
    let (raw, events) = generate_session(cfg)?;
    Ok(Session {
        id: id.to_string(),
        recording: preprocess_session(&raw, ChannelKind::Grad, windowing.frame_rate_hz)?,
        events: Some(events),
    })
}

pub struct Workbench {
    model: ModelConfig,
    windowing: WindowingConfig,
    run: train::RunConfig,
    set: TrainSet,
    test: Session,
    truth: LabelVector,
    params: ModelParams,
    opt: OptimizerState,
    epoch: u32,
    trace: ProbabilitySequence,
}

impl Workbench {
    /// Fresh training and test sessions and an untrained model.
    pub fn new(seed: u64, snr: f64) -> Result<Self> {
        let model = demo_model();
        let windowing = WindowingConfig::default();
        let run = train::RunConfig {
            seed,
            batch_size: 4,
            optimizer: AdamW {
                lr: 3e-3,
                ..AdamW::default()
            },
            ..train::RunConfig::default()
        };
        let train_cfg = synth_config(mebm::rng::derive_seed(seed, "demo-train", 0), snr, TRAIN_SECONDS);
        let test_cfg = synth_config(mebm::rng::derive_seed(seed, "demo-test", 0), snr, TEST_SECONDS);
        let train_session = make_session("train", &train_cfg, &windowing)?;
        let test = make_session("test", &test_cfg, &windowing)?;
        let truth = test.truth()?;
        let set = TrainSet {
            windows: session_windows(&train_session, &windowing, LabelMode::Train, seed)?,
            events: BTreeMap::from([(
                train_session.id.clone(),
                train_session.events.clone().unwrap_or_default(),
            )]),
            windowing: windowing.clone(),
        };
        let params = init_params(&model, seed)?;
        let opt = OptimizerState::new(&params, run.optimizer);
        let trace = predict_session(&params, &model, &windowing, &test)?;
        Ok(Self {
            model,
            windowing,
            run,
            set,
            test,
            truth,
            params,
            opt,
            epoch: 0,
            trace,
        })
    }

    /// Runs one epoch and refreshes the test trace. Returns the mean
    /// training loss.
    pub fn train_epoch(&mut self) -> Result<f64> {
        self.epoch += 1;
        let loss = train::train_epoch(
            &mut self.set,
            &mut self.params,
            &mut self.opt,
            &self.model,
            &self.run,
            self.epoch,
        )?;
        self.trace = predict_session(&self.params, &self.model, &self.windowing, &self.test)?;
        Ok(loss)
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    /// F1_macro on the test session at τ = 0.01, …, 0.99.
    pub fn sweep(&self) -> Result<Vec<f64>> {
        Ok(sweep_thresholds(&self.trace, &self.truth)?
            .into_iter()
            .map(|(_, f1)| f1)
            .collect())
    }

    pub fn segment(&self, threshold: f64) -> Vec<u8> {
        apply_threshold(&self.trace, threshold).values
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace.values
    }

    pub fn truth(&self) -> &[u8] {
        &self.truth.values
    }

    /// Preprocessed test-session channel at the model frame rate.
    pub fn signal(&self, channel: usize) -> Vec<f32> {
        let rec = &self.test.recording;
        if channel < rec.n_channels() {
            rec.row(channel).to_vec()
        } else {
            Vec::new()
        }
    }

    pub fn n_channels(&self) -> usize {
        self.test.recording.n_channels()
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.windowing.frame_rate_hz
    }
}

fn js(e: mebm::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    inner: Workbench,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, snr: f64) -> std::result::Result<Demo, JsError> {
        Ok(Demo {
            inner: Workbench::new(u64::from(seed), snr).map_err(js)?,
        })
    }

    #[wasm_bindgen(js_name = trainEpoch)]
    pub fn train_epoch(&mut self) -> std::result::Result<f64, JsError> {
        self.inner.train_epoch().map_err(js)
    }

    pub fn epoch(&self) -> u32 {
        self.inner.epoch()
    }

    pub fn sweep(&self) -> std::result::Result<Vec<f64>, JsError> {
        self.inner.sweep().map_err(js)
    }

    pub fn segment(&self, threshold: f64) -> Vec<u8> {
        self.inner.segment(threshold)
    }

    pub fn trace(&self) -> Vec<f64> {
        self.inner.trace().to_vec()
    }

    pub fn truth(&self) -> Vec<u8> {
        self.inner.truth().to_vec()
    }

    pub fn signal(&self, channel: usize) -> Vec<f32> {
        self.inner.signal(channel)
    }

    #[wasm_bindgen(js_name = nChannels)]
    pub fn n_channels(&self) -> usize {
        self.inner.n_channels()
    }

    #[wasm_bindgen(js_name = frameRateHz)]
    pub fn frame_rate_hz(&self) -> f64 {
        self.inner.frame_rate_hz()
    }
}
