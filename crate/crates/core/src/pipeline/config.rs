use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::data::ChannelKind;
use crate::error::{Error, Result};
use crate::net::config::parse;
use crate::net::ModelConfig;
use crate::synth::SynthConfig;
use crate::train;
use crate::windowing::WindowingConfig;

/// Every setting a command can consume, built from defaults, then a
/// config file, then command-line overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub windowing: WindowingConfig,
    /// `checkpoint_dir` is taken from the command's output directory.
    pub train: train::RunConfig,
    pub synth: SynthConfig,
    pub channel_kind: ChannelKind,
    pub train_sessions: Vec<PathBuf>,
    pub val_sessions: Vec<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            windowing: WindowingConfig::default(),
            train: train::RunConfig::default(),
            synth: SynthConfig::default(),
            channel_kind: ChannelKind::Grad,
            train_sessions: Vec::new(),
            val_sessions: Vec::new(),
        }
    }
}

const OTHER_KEYS: [&str; 24] = [
    "seed",
    "window_s",
    "step_s",
    "frame_rate_hz",
    "jitter_frames",
    "epochs",
    "batch_size",
    "lr",
    "beta1",
    "beta2",
    "epsilon",
    "weight_decay",
    "n_channels",
    "n_informative",
    "duration_s",
    "sample_rate_hz",
    "snr",
    "speech_min_s",
    "speech_max_s",
    "silence_min_s",
    "silence_max_s",
    "channel_kind",
    "train_sessions",
    "val_sessions",
];

fn paths(v: &str) -> Vec<PathBuf> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .collect()
}

fn join_paths(p: &[PathBuf]) -> String {
    p.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// All accepted keys: model keys first, then the rest.
    pub fn keys() -> impl Iterator<Item = &'static str> {
        ModelConfig::KEYS.into_iter().chain(OTHER_KEYS)
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if ModelConfig::KEYS.contains(&key) {
            return self.model.apply_kv([(key, value)]);
        }
        match key {
            "seed" => {
                let s = parse(key, value)?;
                self.train.seed = s;
                self.synth.seed = s;
            }
            "window_s" => self.windowing.window_s = parse(key, value)?,
            "step_s" => self.windowing.step_s = parse(key, value)?,
            "frame_rate_hz" => self.windowing.frame_rate_hz = parse(key, value)?,
            "jitter_frames" => self.windowing.jitter_frames = parse(key, value)?,
            "epochs" => self.train.epochs = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "lr" => self.train.optimizer.lr = parse(key, value)?,
            "beta1" => self.train.optimizer.beta1 = parse(key, value)?,
            "beta2" => self.train.optimizer.beta2 = parse(key, value)?,
            "epsilon" => self.train.optimizer.epsilon = parse(key, value)?,
            "weight_decay" => self.train.optimizer.weight_decay = parse(key, value)?,
            "n_channels" => self.synth.n_channels = parse(key, value)?,
            "n_informative" => self.synth.n_informative = parse(key, value)?,
            "duration_s" => self.synth.duration_s = parse(key, value)?,
            "sample_rate_hz" => self.synth.sample_rate_hz = parse(key, value)?,
            "snr" => self.synth.snr = parse(key, value)?,
            "speech_min_s" => self.synth.speech_dur_range_s.0 = parse(key, value)?,
            "speech_max_s" => self.synth.speech_dur_range_s.1 = parse(key, value)?,
            "silence_min_s" => self.synth.silence_dur_range_s.0 = parse(key, value)?,
            "silence_max_s" => self.synth.silence_dur_range_s.1 = parse(key, value)?,
            "channel_kind" => {
                self.channel_kind = value
                    .parse()
                    .map_err(|_| Error::config(format!("channel_kind must be grad, mag or other, got {value:?}")))?
            }
            "train_sessions" => self.train_sessions = paths(value),
            "val_sessions" => self.val_sessions = paths(value),
            _ => return Err(Error::config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Defaults, then `file` (flat `key = value` text), then `overrides`.
    pub fn from_layers<'a>(
        file: Option<&str>,
        overrides: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut map: BTreeMap<String, String> = match file {
            Some(text) => crate::kv::parse_kv(text).map_err(|e| Error::config(e.to_string()))?,
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            map.insert(k.to_string(), v.to_string());
        }
        let mut cfg = Self::default();
        for (k, v) in &map {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.windowing.validate()?;
        self.train.validate()?;
        self.synth.validate()
    }

    /// Every key with its effective value, one `key = value` per line.
    pub fn to_text(&self) -> String {
        let w = &self.windowing;
        let t = &self.train;
        let o = &t.optimizer;
        let s = &self.synth;
        let mut pairs = self.model.kv_pairs();
        let rest: [(&str, String); 24] = [
            ("seed", t.seed.to_string()),
            ("window_s", w.window_s.to_string()),
            ("step_s", w.step_s.to_string()),
            ("frame_rate_hz", w.frame_rate_hz.to_string()),
            ("jitter_frames", w.jitter_frames.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("lr", o.lr.to_string()),
            ("beta1", o.beta1.to_string()),
            ("beta2", o.beta2.to_string()),
            ("epsilon", o.epsilon.to_string()),
            ("weight_decay", o.weight_decay.to_string()),
            ("n_channels", s.n_channels.to_string()),
            ("n_informative", s.n_informative.to_string()),
            ("duration_s", s.duration_s.to_string()),
            ("sample_rate_hz", s.sample_rate_hz.to_string()),
            ("snr", s.snr.to_string()),
            ("speech_min_s", s.speech_dur_range_s.0.to_string()),
            ("speech_max_s", s.speech_dur_range_s.1.to_string()),
            ("silence_min_s", s.silence_dur_range_s.0.to_string()),
            ("silence_max_s", s.silence_dur_range_s.1.to_string()),
            ("channel_kind", self.channel_kind.to_string()),
            ("train_sessions", join_paths(&self.train_sessions)),
            ("val_sessions", join_paths(&self.val_sessions)),
        ];
        pairs.extend(rest);
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_is_accepted_and_echoed() {
        let cfg = RunConfig::default();
        let text = cfg.to_text();
        let back = RunConfig::from_layers(Some(&text), []).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunConfig::keys().count(), text.lines().count());
        for (line, key) in text.lines().zip(RunConfig::keys()) {
            assert!(line.starts_with(&format!("{key} = ")), "{line}");
        }
    }

    #[test]
    fn precedence_defaults_file_flags() {
        let file = "epochs = 4\nbatch_size = 2\n# comment\nsnr = 1.5\n";
        let cfg = RunConfig::from_layers(Some(file), [("batch_size", "3"), ("d", "16")]).unwrap();
        assert_eq!(cfg.train.epochs, 4);
        assert_eq!(cfg.train.batch_size, 3);
        assert_eq!(cfg.synth.snr, 1.5);
        assert_eq!(cfg.model.d, 16);
        assert_eq!(cfg.model.n_bm, 5);
        assert_eq!(cfg.train.optimizer.lr, 1e-3);
        assert_eq!(RunConfig::from_layers(None, []).unwrap().train.epochs, 10);
    }

    #[test]
    fn order_independent() {
        let a = RunConfig::from_layers(Some("seed = 3\nlstm_hidden = 4\nsnr = 0\n"), []).unwrap();
        let b = RunConfig::from_layers(Some("snr = 0\nlstm_hidden = 4\nseed = 3\n"), []).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.synth.seed, 3);
        assert_eq!(a.train.seed, 3);
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(
            RunConfig::from_layers(Some("colour = red\n"), []),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::from_layers(None, [("epochs", "x")]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::from_layers(None, [("dropout_p", "1.5")]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            RunConfig::from_layers(Some("no equals\n"), []),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn session_lists() {
        let cfg = RunConfig::from_layers(None, [("train_sessions", "a, b,c"), ("val_sessions", "v")]).unwrap();
        assert_eq!(
            cfg.train_sessions,
            vec![PathBuf::from("a"), PathBuf::from("b"), PathBuf::from("c")]
        );
        assert_eq!(cfg.val_sessions, vec![PathBuf::from("v")]);
    }
}
