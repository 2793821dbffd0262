//! `mebm` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 I/O or file
//! format error, 4 numeric failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mebm::data::{load_events, load_recording, rasterize_labels, LabelVector};
use mebm::eval::{apply_threshold, labels_from_text, load_trace, save_labels, save_trace};
use mebm::net::load_checkpoint;
use mebm::pipeline::{self, RunConfig};
use mebm::{Error, Result};

const AFTER_HELP: &str = "Any configuration key can also be given as `--key value` \
(dashes and underscores are interchangeable), e.g. `--snr 0` or `--lstm-hidden 16`. \
Run `mebm info` to list every key with its default.";

#[derive(Parser)]
#[command(name = "mebm", version, about = "Speech-activity decoding from MEG-like recordings", after_help = AFTER_HELP)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run seed; overrides the config file and every other flag.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Config override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic session (recording.megr + events.tsv) into an existing directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and keep the best checkpoints in OUT.
    Train {
        #[arg(long)]
        out: PathBuf,
        /// Training session directories, comma separated.
        #[arg(long)]
        train: Option<String>,
        /// Validation session directories, comma separated.
        #[arg(long)]
        val: Option<String>,
    },
    /// Sweep 99 thresholds over every stored checkpoint and write the selection.
    Sweep {
        /// Directory holding store.tsv and its checkpoints.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        val: Option<String>,
    },
    /// Write a session probability trace and, with a threshold, 0/1 labels.
    Infer {
        /// Session directory holding recording.megr.
        #[arg(long)]
        session: PathBuf,
        #[arg(long, required_unless_present = "selection", conflicts_with = "selection")]
        checkpoint: Option<PathBuf>,
        /// Selection report from `sweep`; supplies checkpoint and threshold.
        #[arg(long)]
        selection: Option<PathBuf>,
        /// Output directory for trace.txt and labels.txt.
        #[arg(long)]
        out: PathBuf,
        /// Output frame rate in Hz (default: the model frame rate).
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Score predictions against ground truth and write a metric report.
    Eval {
        /// Label file, or a trace file when --threshold is given.
        #[arg(long)]
        pred: PathBuf,
        /// Label file, or a session directory with events.tsv.
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        /// Report file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the parameter count and the effective configuration.
    Info,
}

/// Splits `--key value` / `--key=value` pairs naming config keys out of the
/// argument list; everything else goes to clap.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let keys: Vec<&str> = RunConfig::keys().filter(|&k| k != "seed").collect();
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match body.split_once('=') {
            Some((n, v)) => (n.replace('-', "_"), Some(v.to_string())),
            None => (body.replace('-', "_"), None),
        };
        if !keys.contains(&name.as_str()) {
            rest.push(arg);
            continue;
        }
        match inline.or_else(|| it.next()) {
            Some(v) => overrides.push((name, v)),
            None => rest.push(arg),
        }
    }
    (rest, overrides)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Dimension(_) | Error::Degenerate(_) | Error::EmptySelection(_) => 2,
        Error::Io(_) | Error::Format(_) | Error::Length(_) | Error::Header(_) | Error::Encoding(_) => 3,
        Error::Numeric { .. } => 4,
    }
}

fn load_config(common: &Common, mut overrides: Vec<(String, String)>) -> Result<RunConfig> {
    let file = match &common.config {
        Some(p) => Some(fs::read_to_string(p)?),
        None => None,
    };
    for s in &common.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {s:?}")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = common.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    RunConfig::from_layers(file.as_deref(), overrides.iter().map(|(k, v)| (k.as_str(), v.as_str())))
}

fn check_threshold(t: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(Error::Config(format!("threshold must be in [0, 1], got {t}")))
    }
}

fn with_sessions(
    mut overrides: Vec<(String, String)>,
    train: Option<String>,
    val: Option<String>,
) -> Vec<(String, String)> {
    if let Some(t) = train {
        overrides.push(("train_sessions".into(), t));
    }
    if let Some(v) = val {
        overrides.push(("val_sessions".into(), v));
    }
    overrides
}

/// Ground truth on the same frame grid as a trace written by `infer`.
fn session_truth(dir: &Path, cfg: &RunConfig, rate_hz: f64) -> Result<LabelVector> {
    let raw = load_recording(dir.join(pipeline::RECORDING_FILE))?;
    let events = load_events(dir.join(pipeline::EVENTS_FILE))?;
    let n = pipeline::output_len(&raw, cfg.windowing.frame_rate_hz, rate_hz);
    Ok(rasterize_labels(&events, rate_hz, n))
}

fn run(cli: Cli, overrides: Vec<(String, String)>) -> Result<()> {
    let common = &cli.common;
    match cli.command {
        Command::Synth { out } => {
            let cfg = load_config(common, overrides)?;
            let (rec, events) = mebm::synth::generate_session(&cfg.synth)?;
            pipeline::write_session(&out, &rec, &events)?;
            print!("{}", pipeline::session_summary(&rec, &events));
        }
        Command::Train { out, train, val } => {
            let cfg = load_config(common, with_sessions(overrides, train, val))?;
            println!("epoch\ttrain_loss\tval_loss");
            let outcome = pipeline::run_train(&cfg, &out, |r| {
                println!("{}\t{:.6}\t{:.6}", r.epoch, r.train_loss, r.validation_loss);
            })?;
            println!("kept {} checkpoints in {}", outcome.store.len(), out.display());
        }
        Command::Sweep { out, val } => {
            let cfg = load_config(common, with_sessions(overrides, None, val))?;
            let sweep = pipeline::run_sweep(&cfg, &out)?;
            print!("{}", sweep.selection.to_text());
        }
        Command::Infer {
            session,
            checkpoint,
            selection,
            out,
            rate,
            threshold,
        } => {
            let mut cfg = load_config(common, overrides)?;
            let (ckpt, selected) = match (checkpoint, selection) {
                (Some(path), _) => (load_checkpoint(path)?, None),
                (None, Some(path)) => {
                    let (sel, ckpt) = pipeline::load_selection(&path)?;
                    (ckpt, Some(sel.threshold))
                }
                (None, None) => return Err(Error::Config("give --checkpoint or --selection".into())),
            };
            cfg.model = ckpt.config.clone();
            let threshold = threshold.or(selected).map(check_threshold).transpose()?;
            let s = pipeline::load_session(&session, &cfg, false)?;
            let trace = pipeline::infer_session(&ckpt, &cfg, &s, rate)?;
            fs::create_dir_all(&out)?;
            save_trace(&trace, out.join("trace.txt"))?;
            println!("frames={}\nrate_hz={}", trace.len(), trace.frame_rate_hz);
            if let Some(t) = threshold {
                save_labels(&apply_threshold(&trace, t), out.join("labels.txt"))?;
                println!("threshold={t:.2}");
            }
        }
        Command::Eval {
            pred,
            truth,
            threshold,
            out,
        } => {
            let cfg = load_config(common, overrides)?;
            let pred_labels = match threshold {
                Some(t) => apply_threshold(&load_trace(&pred)?, check_threshold(t)?),
                None => labels_from_text(&fs::read_to_string(&pred)?)?,
            };
            let truth_labels = if truth.is_dir() {
                session_truth(&truth, &cfg, pred_labels.frame_rate_hz)?
            } else {
                labels_from_text(&fs::read_to_string(&truth)?)?
            };
            let report = pipeline::evaluate(&pred_labels, &truth_labels, threshold, None)?;
            fs::write(&out, report.to_text())?;
            print!("{}", report.to_text());
        }
        Command::Info => {
            let cfg = load_config(common, overrides)?;
            print!("{}", pipeline::info_text(&cfg));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let (args, overrides) = split_overrides(std::env::args().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli, overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
