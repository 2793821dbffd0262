//! MSE training with AdamW, seeded per-epoch shuffling and jitter, and
//! retention of the best checkpoints by validation loss.

mod optim;
mod store;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

pub use optim::{adamw_step, decays, AdamW, OptimizerState};
pub use store::{CheckpointStore, StoreEntry, DEFAULT_STORE_CAPACITY};

use crate::data::{EventTrack, LabelVector};
use crate::error::{Error, Result};
use crate::net::model::mse;
use crate::net::{
    init_params, model_forward, param_gradients, save_checkpoint, Checkpoint, Example, ModelConfig, ModelParams,
    ProbabilitySequence,
};
use crate::rng;
use crate::windowing::{relabel_windows, TrainingWindow, WindowingConfig};

pub const STORE_FILE: &str = "store.tsv";
pub const LOSS_LOG_FILE: &str = "train_log.tsv";

pub fn checkpoint_file_name(epoch: u32) -> String {
    format!("ckpt_epoch_{epoch}.mebm")
}

/// `(1/T) Σ (p_t − y_t)²`
pub fn mse_loss(p: &ProbabilitySequence, y: &LabelVector) -> Result<f64> {
    mse(&p.values, &y.as_f64())
}

/// Mean per-window MSE in evaluation mode.
pub fn validation_loss(params: &ModelParams, cfg: &ModelConfig, windows: &[TrainingWindow]) -> Result<f64> {
    if windows.is_empty() {
        return Err(Error::Degenerate("no validation windows".into()));
    }
    let one = |w: &TrainingWindow| -> Result<f64> {
        let p = model_forward(&w.signal, params, cfg, None)?;
        mse_loss(&p, &w.labels)
    };
    #[cfg(feature = "parallel")]
    let losses: Vec<Result<f64>> = {
        use rayon::prelude::*;
        windows.par_iter().map(one).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let losses: Vec<Result<f64>> = windows.iter().map(one).collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / windows.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub epochs: u32,
    pub batch_size: usize,
    pub seed: u64,
    pub checkpoint_dir: PathBuf,
    pub optimizer: AdamW,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 8,
            seed: 0,
            checkpoint_dir: PathBuf::from("checkpoints"),
            optimizer: AdamW::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        self.optimizer.validate()
    }
}

/// Training windows together with the session events their labels are
/// redrawn from every epoch.
#[derive(Debug, Clone)]
pub struct TrainSet {
    pub windows: Vec<TrainingWindow>,
    pub events: BTreeMap<String, EventTrack>,
    pub windowing: WindowingConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: u32,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub store: CheckpointStore,
    pub history: Vec<EpochRecord>,
    /// Weights after the last epoch, at full precision.
    pub params: ModelParams,
}

/// Loss log text: a header comment, then `epoch<TAB>train<TAB>val` lines.
pub fn loss_log(history: &[EpochRecord]) -> String {
    let mut out = String::from("# epoch\ttrain_loss\tval_loss\n");
    for r in history {
        let _ = writeln!(out, "{}\t{}\t{}", r.epoch, r.train_loss, r.validation_loss);
    }
    out
}

pub fn train(data: &mut TrainSet, val: &[TrainingWindow], cfg: &ModelConfig, run: &RunConfig) -> Result<TrainOutcome> {
    train_with(data, val, cfg, run, |_| {})
}

/// Runs `run.epochs` epochs, calling `on_epoch` after each one.
///
/// Every epoch redraws the training labels (stream `jitter`), shuffles the
/// window order (stream `shuffle`) and draws dropout masks (stream
/// `dropout`), each seeded from `(run.seed, epoch)`. Weights are
/// initialised from `run.seed`. Validation loss is measured on the weights
/// as they are stored in the checkpoint. Checkpoints that fall out of the
/// store are deleted.
pub fn train_with(
    data: &mut TrainSet,
    val: &[TrainingWindow],
    cfg: &ModelConfig,
    run: &RunConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    run.validate()?;
    cfg.validate()?;
    if data.windows.is_empty() {
        return Err(Error::Degenerate("no training windows".into()));
    }
    if val.is_empty() {
        return Err(Error::Degenerate("no validation windows".into()));
    }
    let dir = run.checkpoint_dir.as_path();
    if !dir.is_dir() {
        fs::create_dir_all(dir)?;
    }

    let mut params = init_params(cfg, run.seed)?;
    let mut opt = OptimizerState::new(&params, run.optimizer);
    let mut store = CheckpointStore::default();
    let mut history = Vec::with_capacity(run.epochs as usize);

    for epoch in 1..=run.epochs {
        let train_loss = train_epoch(data, &mut params, &mut opt, cfg, run, epoch)?;

        let mut stored = params.clone();
        stored.round_to_f32();
        let validation_loss = validation_loss(&stored, cfg, val)?;
        if !validation_loss.is_finite() {
            return Err(Error::numeric("validation loss"));
        }
        let name = checkpoint_file_name(epoch);
        save_checkpoint(
            &Checkpoint {
                config: cfg.clone(),
                params: stored,
                epoch,
                validation_loss,
            },
            dir.join(&name),
        )?;
        if let Some(dropped) = store.offer(StoreEntry {
            validation_loss,
            epoch,
            path: PathBuf::from(name),
        })? {
            fs::remove_file(dir.join(&dropped.path))?;
        }
        store.save(dir.join(STORE_FILE))?;

        let record = EpochRecord {
            epoch,
            train_loss,
            validation_loss,
        };
        history.push(record);
        fs::write(dir.join(LOSS_LOG_FILE), loss_log(&history))?;
        on_epoch(&record);
    }

    let store = CheckpointStore::load(dir.join(STORE_FILE))?;
    Ok(TrainOutcome { store, history, params })
}

/// One pass over `data` with fresh jittered labels, a fresh shuffle and
/// fresh dropout masks for `epoch`. Returns the mean training loss.
pub fn train_epoch(
    data: &mut TrainSet,
    params: &mut ModelParams,
    opt: &mut OptimizerState,
    cfg: &ModelConfig,
    run: &RunConfig,
    epoch: u32,
) -> Result<f64> {
    if data.windows.is_empty() {
        return Err(Error::Degenerate("no training windows".into()));
    }
    let e = u64::from(epoch);
    relabel_windows(
        &mut data.windows,
        &data.events,
        &data.windowing,
        &mut rng::stream(run.seed, "jitter", e),
    );
    let mut order: Vec<usize> = (0..data.windows.len()).collect();
    order.shuffle(&mut rng::stream(run.seed, "shuffle", e));
    let mut dropout = rng::stream(run.seed, "dropout", e);

    let targets: Vec<Vec<f64>> = data.windows.iter().map(|w| w.labels.as_f64()).collect();
    let mut loss_sum = 0.0;
    for chunk in order.chunks(run.batch_size) {
        let batch: Vec<Example<'_>> = chunk
            .iter()
            .map(|&i| (&data.windows[i].signal, targets[i].as_slice()))
            .collect();
        let (loss, grads) = param_gradients(&batch, params, cfg, &mut dropout)?;
        if !loss.is_finite() {
            return Err(Error::numeric("training loss"));
        }
        adamw_step(params, &grads, opt)?;
        loss_sum += loss * chunk.len() as f64;
    }
    Ok(loss_sum / order.len() as f64)
}

/// Reads a loss log written by [`train`].
pub fn read_loss_log(path: impl AsRef<Path>) -> Result<Vec<EpochRecord>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || Error::Format(format!("loss log line {line:?}"));
        if f.len() != 3 {
            return Err(bad());
        }
        out.push(EpochRecord {
            epoch: f[0].parse().map_err(|_| bad())?,
            train_loss: f[1].parse().map_err(|_| bad())?,
            validation_loss: f[2].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}
