//! End-to-end driver shared by the command line and the acceptance suite.
//!
//! A session lives in a directory holding `recording.megr` and, when ground
//! truth is known, `events.tsv`.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub use config::RunConfig;

use crate::data::preprocess::resampled_len;
use crate::data::{
    load_events, load_recording, preprocess_session, rasterize_labels, save_events, save_recording, EventTrack,
    LabelVector, Recording,
};
use crate::error::{Error, Result};
use crate::eval::{self, Candidate, MetricReport, Selection};
use crate::net::{
    count_params, load_checkpoint, model_forward, Checkpoint, ModelConfig, ModelParams, ProbabilitySequence,
};
use crate::rng;
use crate::train::{self, CheckpointStore, TrainOutcome, TrainSet};
use crate::windowing::{extract_windows, normalize_segment, LabelMode, TrainingWindow, WindowingConfig};

pub const RECORDING_FILE: &str = "recording.megr";
pub const EVENTS_FILE: &str = "events.tsv";
pub const RUN_CONFIG_FILE: &str = "run.conf";
pub const SWEEP_FILE: &str = "sweep.tsv";
pub const SELECTION_FILE: &str = "selection.txt";

/// A preprocessed session at the model frame rate.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub recording: Recording,
    pub events: Option<EventTrack>,
}

impl Session {
    pub fn n_frames(&self) -> usize {
        self.recording.n_samples()
    }

    /// Frame labels over the whole session.
    pub fn truth(&self) -> Result<LabelVector> {
        let ev = self
            .events
            .as_ref()
            .ok_or_else(|| Error::config(format!("session {} has no {EVENTS_FILE}", self.id)))?;
        Ok(rasterize_labels(ev, self.recording.sample_rate_hz(), self.n_frames()))
    }
}

pub fn write_session(dir: &Path, rec: &Recording, events: &EventTrack) -> Result<()> {
    if !dir.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", dir.display()),
        )));
    }
    save_recording(rec, dir.join(RECORDING_FILE))?;
    save_events(events, dir.join(EVENTS_FILE))
}

/// Short summary of a generated session.
pub fn session_summary(rec: &Recording, events: &EventTrack) -> String {
    let truth = rasterize_labels(events, rec.sample_rate_hz(), rec.n_samples());
    let speech = truth.values.iter().filter(|&&v| v == 1).count();
    format!(
        "frames={}\nchannels={}\nsample_rate_hz={}\nintervals={}\nspeech_fraction={:.6}\n",
        rec.n_samples(),
        rec.n_channels(),
        rec.sample_rate_hz(),
        events.len(),
        speech as f64 / rec.n_samples().max(1) as f64
    )
}

/// Reads a session directory and runs the preprocessing chain. Events are
/// optional unless `need_events` is set.
pub fn load_session(dir: &Path, cfg: &RunConfig, need_events: bool) -> Result<Session> {
    let raw = load_recording(dir.join(RECORDING_FILE))?;
    let recording = preprocess_session(&raw, cfg.channel_kind, cfg.windowing.frame_rate_hz)?;
    if recording.n_channels() != cfg.model.c_in {
        return Err(Error::config(format!(
            "session {} has {} {} channels, c_in is {}",
            dir.display(),
            recording.n_channels(),
            cfg.channel_kind,
            cfg.model.c_in
        )));
    }
    let ev_path = dir.join(EVENTS_FILE);
    let events = if need_events || ev_path.exists() {
        Some(load_events(ev_path)?)
    } else {
        None
    };
    Ok(Session {
        id: dir.display().to_string(),
        recording,
        events,
    })
}

/// Segment-normalized windows with labels in `mode`.
pub fn session_windows(s: &Session, w: &WindowingConfig, mode: LabelMode, seed: u64) -> Result<Vec<TrainingWindow>> {
    let empty = EventTrack::empty();
    let events = s.events.as_ref().unwrap_or(&empty);
    let mut rng = rng::stream(seed, "jitter", 0);
    let windows = extract_windows(&s.recording, events, w, mode, &s.id, &mut rng)?;
    Ok(windows.iter().map(normalize_segment).collect())
}

/// Merged session trace at the model frame rate.
pub fn predict_session(
    params: &ModelParams,
    model: &ModelConfig,
    w: &WindowingConfig,
    s: &Session,
) -> Result<ProbabilitySequence> {
    let windows = session_windows(s, w, LabelMode::Eval, 0)?;
    let forward = |win: &TrainingWindow| -> Result<(usize, ProbabilitySequence)> {
        Ok((win.start_frame, model_forward(&win.signal, params, model, None)?))
    };
    #[cfg(feature = "parallel")]
    let preds: Vec<Result<(usize, ProbabilitySequence)>> = {
        use rayon::prelude::*;
        windows.par_iter().map(forward).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let preds: Vec<Result<(usize, ProbabilitySequence)>> = windows.iter().map(forward).collect();
    let preds = preds.into_iter().collect::<Result<Vec<_>>>()?;
    eval::merge_overlaps(&preds, s.n_frames())
}

fn load_all(paths: &[PathBuf], cfg: &RunConfig, what: &str) -> Result<Vec<Session>> {
    if paths.is_empty() {
        return Err(Error::config(format!("{what} is empty")));
    }
    paths.iter().map(|p| load_session(p, cfg, true)).collect()
}

/// Loads the configured train and validation sessions and trains into
/// `out`. The effective configuration is echoed to `out/run.conf`.
pub fn run_train(cfg: &RunConfig, out: &Path, on_epoch: impl FnMut(&train::EpochRecord)) -> Result<TrainOutcome> {
    let train_sessions = load_all(&cfg.train_sessions, cfg, "train_sessions")?;
    let val_sessions = load_all(&cfg.val_sessions, cfg, "val_sessions")?;
    let seed = cfg.seed();
    let mut set = TrainSet {
        windows: Vec::new(),
        events: Default::default(),
        windowing: cfg.windowing.clone(),
    };
    for s in &train_sessions {
        set.windows
            .extend(session_windows(s, &cfg.windowing, LabelMode::Train, seed)?);
        set.events
            .insert(s.id.clone(), s.events.clone().expect("loaded with events"));
    }
    let mut val = Vec::new();
    for s in &val_sessions {
        val.extend(session_windows(s, &cfg.windowing, LabelMode::Eval, seed)?);
    }
    fs::create_dir_all(out)?;
    fs::write(out.join(RUN_CONFIG_FILE), cfg.to_text())?;
    let run = train::RunConfig {
        checkpoint_dir: out.to_path_buf(),
        ..cfg.train.clone()
    };
    train::train_with(&mut set, &val, &cfg.model, &run, on_epoch)
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub selection: Selection,
    pub candidates: Vec<Candidate>,
    pub sweeps: Vec<Vec<(f64, f64)>>,
    pub truth: LabelVector,
}

fn concat_traces(traces: Vec<ProbabilitySequence>) -> ProbabilitySequence {
    let rate = traces
        .first()
        .map_or(crate::net::model::MODEL_FRAME_RATE_HZ, |t| t.frame_rate_hz);
    ProbabilitySequence::new(rate, traces.into_iter().flat_map(|t| t.values).collect())
}

/// Scores every stored checkpoint over the validation sessions at all 99
/// thresholds and picks the best pair. Writes `sweep.tsv` and
/// `selection.txt` into `store_dir`.
pub fn run_sweep(cfg: &RunConfig, store_dir: &Path) -> Result<SweepOutcome> {
    let store = CheckpointStore::load(store_dir.join(train::STORE_FILE))?;
    if store.entries().is_empty() {
        return Err(Error::config(format!(
            "checkpoint store in {} is empty",
            store_dir.display()
        )));
    }
    let val_sessions = load_all(&cfg.val_sessions, cfg, "val_sessions")?;
    let truths = val_sessions.iter().map(Session::truth).collect::<Result<Vec<_>>>()?;
    let truth = LabelVector::new(
        cfg.windowing.frame_rate_hz,
        truths.into_iter().flat_map(|t| t.values).collect(),
    )?;

    let mut candidates = Vec::with_capacity(store.entries().len());
    for entry in store.entries() {
        let ckpt = load_checkpoint(&entry.path)?;
        let name = entry.path.strip_prefix(store_dir).unwrap_or(&entry.path);
        let traces = val_sessions
            .iter()
            .map(|s| predict_session(&ckpt.params, &ckpt.config, &cfg.windowing, s))
            .collect::<Result<Vec<_>>>()?;
        candidates.push(Candidate {
            epoch: entry.epoch,
            checkpoint: name.display().to_string(),
            validation_loss: entry.validation_loss,
            trace: concat_traces(traces),
        });
    }
    let sweeps = eval::sweep_candidates(&candidates, &truth)?;
    let selection = eval::select_from_sweeps(&candidates, &sweeps)?;
    fs::write(store_dir.join(SWEEP_FILE), eval::sweep_table(&candidates, &sweeps))?;
    fs::write(store_dir.join(SELECTION_FILE), selection.to_text())?;
    Ok(SweepOutcome {
        selection,
        candidates,
        sweeps,
        truth,
    })
}

/// Reads a selection report and its checkpoint, resolved against the
/// report's directory.
pub fn load_selection(path: &Path) -> Result<(Selection, Checkpoint)> {
    let sel = Selection::from_text(&fs::read_to_string(path)?)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let ckpt = load_checkpoint(dir.join(&sel.checkpoint))?;
    Ok((sel, ckpt))
}

/// Frames in a session trace at `rate_hz`: the preprocessed frame count at
/// `frame_rate_hz`, carried to other rates by the endpoint-aligned
/// resampling rule.
pub fn output_len(raw: &Recording, frame_rate_hz: f64, rate_hz: f64) -> usize {
    let n = resampled_len(raw.n_samples(), raw.sample_rate_hz(), frame_rate_hz);
    if rate_hz == frame_rate_hz {
        n
    } else {
        ((n.saturating_sub(1)) as f64 / frame_rate_hz * rate_hz).round() as usize + 1
    }
}

/// Session trace from `ckpt`, optionally resampled to `rate_hz`.
pub fn infer_session(
    ckpt: &Checkpoint,
    cfg: &RunConfig,
    s: &Session,
    rate_hz: Option<f64>,
) -> Result<ProbabilitySequence> {
    let trace = predict_session(&ckpt.params, &ckpt.config, &cfg.windowing, s)?;
    match rate_hz {
        Some(r) => eval::resample_probs(&trace, r),
        None => Ok(trace),
    }
}

/// Metric report for `pred` against `truth`.
pub fn evaluate(
    pred: &LabelVector,
    truth: &LabelVector,
    threshold: Option<f64>,
    checkpoint: Option<String>,
) -> Result<MetricReport> {
    let mut report = MetricReport::new(pred, truth)?;
    report.threshold = threshold;
    report.checkpoint = checkpoint;
    Ok(report)
}

/// Parameter counts and the effective configuration.
pub fn info_text(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "count_params = {}", count_params(&cfg.model));
    s.push_str(&cfg.to_text());
    s
}

#[cfg(test)]
mod tests;
