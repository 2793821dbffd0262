//! Synthetic MEG-like sessions with known speech intervals.
//!
//! A session alternates silence and speech, starting with silence. Every
//! channel carries unit Gaussian noise. During speech the first
//! `n_informative` channels additionally carry a 10 Hz sinusoid of peak
//! amplitude `snr`, faded in and out with 50 ms half-cosine ramps. Each
//! interval draws its own carrier phase, shared by all informative
//! channels.

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{ChannelKind, ChannelMeta, EventTrack, Interval, Recording};
use crate::error::{Error, Result};
use crate::rng;

pub const CARRIER_HZ: f64 = 10.0;
pub const RAMP_S: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_channels: usize,
    pub n_informative: usize,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub snr: f64,
    pub speech_dur_range_s: (f64, f64),
    pub silence_dur_range_s: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_channels: 8,
            n_informative: 4,
            duration_s: 120.0,
            sample_rate_hz: 250.0,
            snr: 2.0,
            speech_dur_range_s: (0.5, 4.0),
            silence_dur_range_s: (0.3, 2.0),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi;
        if self.n_channels == 0 {
            return Err(Error::config("n_channels must be at least 1"));
        }
        if self.n_informative > self.n_channels {
            return Err(Error::config(format!(
                "n_informative {} exceeds n_channels {}",
                self.n_informative, self.n_channels
            )));
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::config(format!(
                "duration_s must be positive, got {}",
                self.duration_s
            )));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::config(format!(
                "sample_rate_hz must be positive, got {}",
                self.sample_rate_hz
            )));
        }
        if !(self.snr.is_finite() && self.snr >= 0.0) {
            return Err(Error::config(format!("snr must be non-negative, got {}", self.snr)));
        }
        if !range_ok(self.speech_dur_range_s) || !range_ok(self.silence_dur_range_s) {
            return Err(Error::config("duration ranges need 0 < min < max"));
        }
        if (self.duration_s * self.sample_rate_hz).round() < 1.0 {
            return Err(Error::config("session shorter than one sample"));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }
}

/// Alternating silence/speech durations until `duration_s` is filled; the
/// last interval is cut at the session end.
pub fn speech_intervals(cfg: &SynthConfig) -> Result<EventTrack> {
    cfg.validate()?;
    let mut rng = rng::stream(cfg.seed, "synth-events", 0);
    let (s_lo, s_hi) = cfg.speech_dur_range_s;
    let (q_lo, q_hi) = cfg.silence_dur_range_s;
    let mut out = Vec::new();
    let mut t = 0.0;
    loop {
        t += rng.random_range(q_lo..q_hi);
        if t >= cfg.duration_s {
            break;
        }
        let end = (t + rng.random_range(s_lo..s_hi)).min(cfg.duration_s);
        out.push(Interval::new(t, end));
        t = end;
        if t >= cfg.duration_s {
            break;
        }
    }
    EventTrack::new(out)
}

/// Half-cosine fade: 0 at the interval edges, 1 from `RAMP_S` inside.
fn envelope(t: f64, iv: &Interval) -> f64 {
    let edge = (t - iv.onset_s).min(iv.offset_s - t);
    if edge <= 0.0 {
        0.0
    } else if edge >= RAMP_S {
        1.0
    } else {
        0.5 * (1.0 - (PI * edge / RAMP_S).cos())
    }
}

pub fn channel_name(i: usize) -> String {
    format!("MEG{:04}", i + 1)
}

/// Generates one session. Fully determined by `cfg`.
pub fn generate_session(cfg: &SynthConfig) -> Result<(Recording, EventTrack)> {
    let events = speech_intervals(cfg)?;
    let n = cfg.n_samples();
    let sr = cfg.sample_rate_hz;

    let mut phase_rng = rng::stream(cfg.seed, "synth-phase", 0);
    let phases: Vec<f64> = events
        .intervals()
        .iter()
        .map(|_| phase_rng.random_range(0.0..2.0 * PI))
        .collect();
    let mut signal = vec![0.0f64; n];
    for (iv, &phi) in events.intervals().iter().zip(&phases) {
        let first = (iv.onset_s * sr).ceil() as usize;
        let last = ((iv.offset_s * sr).ceil() as usize).min(n);
        for (i, s) in signal.iter_mut().enumerate().take(last).skip(first) {
            let t = i as f64 / sr;
            *s = cfg.snr * envelope(t, iv) * (2.0 * PI * CARRIER_HZ * t + phi).sin();
        }
    }

    let mut noise_rng = rng::stream(cfg.seed, "synth-noise", 0);
    let mut data = Vec::with_capacity(cfg.n_channels * n);
    for c in 0..cfg.n_channels {
        let informative = c < cfg.n_informative;
        for &s in &signal {
            let e: f64 = StandardNormal.sample(&mut noise_rng);
            let v = if informative { e + s } else { e };
            data.push(v as f32);
        }
    }
    let channels = (0..cfg.n_channels)
        .map(|i| ChannelMeta::new(channel_name(i), ChannelKind::Grad))
        .collect();
    Ok((Recording::new(sr, channels, n, data)?, events))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::rasterize_labels;

    #[test]
    fn default_speech_fraction_in_band() {
        let cfg = SynthConfig::default();
        let (rec, ev) = generate_session(&cfg).unwrap();
        let labels = rasterize_labels(&ev, 100.0, 12_000);
        let frac = labels.values.iter().map(|&v| f64::from(v)).sum::<f64>() / 12_000.0;
        assert!((0.45..=0.80).contains(&frac), "speech fraction {frac}");
        assert_eq!(rec.n_samples(), 30_000);
        assert!(rec.channels().iter().all(|c| c.kind == ChannelKind::Grad));
    }

    #[test]
    fn duration_process_fraction_over_many_seeds() {
        // expected speech share E[speech]/(E[speech]+E[silence]) = 2.25/3.4
        let mut total = 0.0;
        let mut speech = 0.0;
        for seed in 0..40 {
            let cfg = SynthConfig {
                seed,
                duration_s: 600.0,
                ..SynthConfig::default()
            };
            let ev = speech_intervals(&cfg).unwrap();
            speech += ev.intervals().iter().map(|i| i.offset_s - i.onset_s).sum::<f64>();
            total += cfg.duration_s;
        }
        assert!((speech / total - 2.25 / 3.4).abs() < 0.02);
    }

    #[test]
    fn deterministic_in_seed() {
        let cfg = SynthConfig {
            duration_s: 20.0,
            ..SynthConfig::default()
        };
        let (a, ea) = generate_session(&cfg).unwrap();
        let (b, eb) = generate_session(&cfg).unwrap();
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
        assert_eq!(ea, eb);
        let (c, _) = generate_session(&SynthConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn intervals_valid_and_inside_session() {
        for seed in 0..20 {
            let cfg = SynthConfig {
                seed,
                duration_s: 30.0,
                ..SynthConfig::default()
            };
            let ev = speech_intervals(&cfg).unwrap();
            let ivs = ev.intervals();
            assert!(!ivs.is_empty());
            assert!(ivs[0].onset_s >= 0.3);
            for w in ivs.windows(2) {
                let gap = w[1].onset_s - w[0].offset_s;
                assert!((0.3..2.0).contains(&gap));
            }
            assert!(ivs.last().unwrap().offset_s <= 30.0);
        }
    }

    #[test]
    fn noise_variance_near_one() {
        let cfg = SynthConfig {
            duration_s: 60.0,
            snr: 0.0,
            ..SynthConfig::default()
        };
        let (rec, _) = generate_session(&cfg).unwrap();
        for row in rec.rows() {
            let n = row.len() as f64;
            let mean = row.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
            let var = row.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n;
            assert!((0.8..=1.2).contains(&var), "{var}");
        }
    }

    #[test]
    fn silence_matches_noise_on_informative_channels() {
        let cfg = SynthConfig {
            duration_s: 120.0,
            ..SynthConfig::default()
        };
        let (rec, ev) = generate_session(&cfg).unwrap();
        let sr = cfg.sample_rate_hz;
        let silent: Vec<usize> = (0..rec.n_samples())
            .filter(|&i| !ev.intervals().iter().any(|iv| iv.contains(i as f64 / sr)))
            .collect();
        let var = |c: usize| {
            let row = rec.row(c);
            silent.iter().map(|&i| f64::from(row[i]).powi(2)).sum::<f64>() / silent.len() as f64
        };
        let inf: f64 = (0..4).map(var).sum::<f64>() / 4.0;
        let noise: f64 = (4..8).map(var).sum::<f64>() / 4.0;
        assert!((inf - noise).abs() <= 0.1);
    }

    #[test]
    fn speech_raises_informative_power() {
        let cfg = SynthConfig::default();
        let (rec, ev) = generate_session(&cfg).unwrap();
        let sr = cfg.sample_rate_hz;
        let speech: Vec<usize> = (0..rec.n_samples())
            .filter(|&i| ev.intervals().iter().any(|iv| iv.contains(i as f64 / sr)))
            .collect();
        let p = |c: usize| speech.iter().map(|&i| f64::from(rec.row(c)[i]).powi(2)).sum::<f64>() / speech.len() as f64;
        // unit noise plus a sinusoid of amplitude 2 (power 2) under the ramps
        assert!(p(0) > 2.6 && p(0) < 3.2, "{}", p(0));
        assert!((p(7) - 1.0).abs() < 0.1);
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = SynthConfig::default();
        for bad in [
            SynthConfig {
                n_informative: 9,
                ..base.clone()
            },
            SynthConfig {
                duration_s: 0.0,
                ..base.clone()
            },
            SynthConfig {
                snr: -1.0,
                ..base.clone()
            },
            SynthConfig {
                speech_dur_range_s: (2.0, 1.0),
                ..base.clone()
            },
            SynthConfig {
                silence_dur_range_s: (0.0, 1.0),
                ..base.clone()
            },
        ] {
            assert!(matches!(generate_session(&bad), Err(Error::Config(_))));
        }
    }
}
