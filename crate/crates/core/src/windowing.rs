//! Fixed-length training windows with jittered onset labels.

use std::collections::BTreeMap;

use rand::Rng as _;

use crate::data::preprocess::zscore_in_place;
use crate::data::{rasterize_range, EventTrack, Interval, LabelVector, Recording};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Mat;

#[derive(Debug, Clone, PartialEq)]
pub struct WindowingConfig {
    pub window_s: f64,
    pub step_s: f64,
    pub frame_rate_hz: f64,
    pub jitter_frames: u32,
}

impl Default for WindowingConfig {
    fn default() -> Self {
        Self {
            window_s: 12.0,
            step_s: 6.0,
            frame_rate_hz: 100.0,
            jitter_frames: 2,
        }
    }
}

impl WindowingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frame_rate_hz.is_finite() && self.frame_rate_hz > 0.0) {
            return Err(Error::config("frame_rate_hz must be positive"));
        }
        if !(self.step_s > 0.0 && self.step_s <= self.window_s) {
            return Err(Error::config(format!(
                "need 0 < step_s <= window_s, got step {} window {}",
                self.step_s, self.window_s
            )));
        }
        if self.window_frames() == 0 || self.step_frames() == 0 {
            return Err(Error::config("window and step must each span at least one frame"));
        }
        Ok(())
    }

    pub fn window_frames(&self) -> usize {
        (self.window_s * self.frame_rate_hz).round() as usize
    }

    pub fn step_frames(&self) -> usize {
        (self.step_s * self.frame_rate_hz).round() as usize
    }
}

/// Whether window labels come from jittered (training) or original
/// (evaluation) onsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingWindow {
    pub start_frame: usize,
    /// `C × T`
    pub signal: Mat,
    pub labels: LabelVector,
    pub session_id: String,
}

impl TrainingWindow {
    pub fn len(&self) -> usize {
        self.signal.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.signal.cols() == 0
    }
}

/// Shifts every onset by an integer number of frames drawn uniformly from
/// `[-jitter_frames, jitter_frames]`. Offsets stay put.
///
/// Shifted onsets are clamped to `[0, offset - 1 frame]` and to not precede
/// the previous interval's offset. Each clamp only pulls the onset back
/// towards its original position, so `|shift| <= jitter_frames` holds for
/// the final onset too.
pub fn jitter_onsets(events: &EventTrack, jitter_frames: u32, frame_rate_hz: f64, rng: &mut Rng) -> EventTrack {
    if jitter_frames == 0 {
        return events.clone();
    }
    let frame = 1.0 / frame_rate_hz;
    let j = i64::from(jitter_frames);
    let mut out: Vec<Interval> = events
        .intervals()
        .iter()
        .map(|iv| {
            let shift = rng.random_range(-j..=j);
            let shifted = iv.onset_s + shift as f64 * frame;
            let upper = (iv.offset_s - frame).max(iv.onset_s);
            Interval::new(shifted.clamp(0.0, upper), iv.offset_s)
        })
        .collect();
    out.sort_by(|a, b| a.offset_s.total_cmp(&b.offset_s));
    for i in 1..out.len() {
        let prev_off = out[i - 1].offset_s;
        if out[i].onset_s < prev_off {
            out[i].onset_s = prev_off;
        }
    }
    EventTrack::new(out).expect("jitter preserves interval validity")
}

/// Number of full windows that fit in `n_frames`.
pub fn window_count(n_frames: usize, window: usize, step: usize) -> usize {
    if n_frames < window {
        0
    } else {
        (n_frames - window) / step + 1
    }
}

/// Slices a session into windows starting at `0, step, 2·step, …`.
/// Trailing frames that do not fill a window are dropped.
///
/// In [`LabelMode::Train`] each window's labels come from its own freshly
/// jittered copy of `events`; in [`LabelMode::Eval`] `rng` is not touched.
pub fn extract_windows(
    rec: &Recording,
    events: &EventTrack,
    cfg: &WindowingConfig,
    mode: LabelMode,
    session_id: &str,
    rng: &mut Rng,
) -> Result<Vec<TrainingWindow>> {
    cfg.validate()?;
    if (rec.sample_rate_hz() - cfg.frame_rate_hz).abs() > 1e-9 * cfg.frame_rate_hz {
        return Err(Error::config(format!(
            "recording is at {} Hz, windows expect {} Hz",
            rec.sample_rate_hz(),
            cfg.frame_rate_hz
        )));
    }
    let t = cfg.window_frames();
    let step = cfg.step_frames();
    let n = rec.n_samples();
    let count = window_count(n, t, step);
    if count == 0 {
        return Err(Error::Degenerate(format!(
            "recording of {n} frames is shorter than one {t}-frame window"
        )));
    }
    let mut windows = Vec::with_capacity(count);
    for w in 0..count {
        let start = w * step;
        let mut data = Vec::with_capacity(rec.n_channels() * t);
        for row in rec.rows() {
            data.extend(row[start..start + t].iter().map(|&v| f64::from(v)));
        }
        let signal = Mat::from_vec(rec.n_channels(), t, data)?;
        let labels = window_labels(events, cfg, mode, start, t, rng);
        windows.push(TrainingWindow {
            start_frame: start,
            signal,
            labels,
            session_id: session_id.to_string(),
        });
    }
    Ok(windows)
}

fn window_labels(
    events: &EventTrack,
    cfg: &WindowingConfig,
    mode: LabelMode,
    start: usize,
    len: usize,
    rng: &mut Rng,
) -> LabelVector {
    match mode {
        LabelMode::Eval => rasterize_range(events, cfg.frame_rate_hz, start, len),
        LabelMode::Train => {
            let jittered = jitter_onsets(events, cfg.jitter_frames, cfg.frame_rate_hz, rng);
            rasterize_range(&jittered, cfg.frame_rate_hz, start, len)
        }
    }
}

/// Redraws training labels for already-extracted windows, one fresh jitter
/// per window. Windows whose session has no entry in `events` keep their
/// labels.
pub fn relabel_windows(
    windows: &mut [TrainingWindow],
    events: &BTreeMap<String, EventTrack>,
    cfg: &WindowingConfig,
    rng: &mut Rng,
) {
    for w in windows {
        if let Some(ev) = events.get(&w.session_id) {
            w.labels = window_labels(ev, cfg, LabelMode::Train, w.start_frame, w.len(), rng);
        }
    }
}

/// Per-channel z-score within the window; labels are untouched.
pub fn normalize_segment(w: &TrainingWindow) -> TrainingWindow {
    let mut out = w.clone();
    for r in 0..out.signal.rows() {
        zscore_in_place(out.signal.row_mut(r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{rasterize_labels, ChannelKind, ChannelMeta};
    use crate::rng::from_seed;
    use proptest::prelude::*;

    fn flat_recording(n: usize, channels: usize) -> Recording {
        let chans = (0..channels)
            .map(|i| ChannelMeta::new(format!("g{i}"), ChannelKind::Grad))
            .collect();
        let data = (0..channels * n).map(|i| (i % 97) as f32).collect();
        Recording::new(100.0, chans, n, data).unwrap()
    }

    fn single_onset(frame: usize) -> EventTrack {
        let on = frame as f64 / 100.0;
        EventTrack::new(vec![Interval::new(on, on + 1.0)]).unwrap()
    }

    fn onset_frame(ev: &EventTrack) -> i64 {
        (ev.intervals()[0].onset_s * 100.0).round() as i64
    }

    #[test]
    fn jitter_stays_in_five_frame_band() {
        let ev = single_onset(100);
        let mut rng = from_seed(3);
        for _ in 0..500 {
            let f = onset_frame(&jitter_onsets(&ev, 2, 100.0, &mut rng));
            assert!((98..=102).contains(&f), "{f}");
        }
    }

    #[test]
    fn zero_jitter_is_identity() {
        let ev = EventTrack::new(vec![Interval::new(0.013, 0.5), Interval::new(0.7, 0.704)]).unwrap();
        assert_eq!(jitter_onsets(&ev, 0, 100.0, &mut from_seed(1)), ev);
    }

    #[test]
    fn onset_at_zero_clamps() {
        let ev = single_onset(0);
        let mut rng = from_seed(9);
        let mut seen = [false; 3];
        for _ in 0..500 {
            let f = onset_frame(&jitter_onsets(&ev, 2, 100.0, &mut rng));
            assert!((0..=2).contains(&f), "{f}");
            seen[f as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn jitter_frequencies_are_uniform() {
        let ev = single_onset(100);
        let mut rng = from_seed(42);
        let mut counts = [0usize; 5];
        let draws = 10_000;
        for _ in 0..draws {
            let f = onset_frame(&jitter_onsets(&ev, 2, 100.0, &mut rng));
            counts[(f - 98) as usize] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.2).abs() <= 0.02, "{counts:?}");
        }
    }

    #[test]
    fn sixty_second_session_gives_nine_windows() {
        let rec = flat_recording(6000, 2);
        let ws = extract_windows(
            &rec,
            &EventTrack::empty(),
            &WindowingConfig::default(),
            LabelMode::Eval,
            "s",
            &mut from_seed(0),
        )
        .unwrap();
        let starts: Vec<_> = ws.iter().map(|w| w.start_frame).collect();
        assert_eq!(starts, (0..9).map(|k| k * 600).collect::<Vec<_>>());
        assert!(ws.iter().all(|w| w.len() == 1200 && w.labels.len() == 1200));
    }

    #[test]
    fn exact_and_tiled_sessions() {
        let cfg = WindowingConfig::default();
        let one = extract_windows(
            &flat_recording(1200, 1),
            &EventTrack::empty(),
            &cfg,
            LabelMode::Eval,
            "s",
            &mut from_seed(0),
        )
        .unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].start_frame, 0);

        let tiled = WindowingConfig {
            step_s: 12.0,
            ..cfg.clone()
        };
        let ws = extract_windows(
            &flat_recording(2400, 1),
            &EventTrack::empty(),
            &tiled,
            LabelMode::Eval,
            "s",
            &mut from_seed(0),
        )
        .unwrap();
        assert_eq!(ws.iter().map(|w| w.start_frame).collect::<Vec<_>>(), vec![0, 1200]);

        let short = extract_windows(
            &flat_recording(1199, 1),
            &EventTrack::empty(),
            &cfg,
            LabelMode::Eval,
            "s",
            &mut from_seed(0),
        );
        assert!(matches!(short, Err(Error::Degenerate(_))));
    }

    #[test]
    fn window_signal_matches_session() {
        let rec = flat_recording(3000, 3);
        let ws = extract_windows(
            &rec,
            &EventTrack::empty(),
            &WindowingConfig::default(),
            LabelMode::Eval,
            "s",
            &mut from_seed(0),
        )
        .unwrap();
        for w in &ws {
            for c in 0..3 {
                let expect: Vec<f64> = rec.row(c)[w.start_frame..w.start_frame + 1200]
                    .iter()
                    .map(|&v| f64::from(v))
                    .collect();
                assert_eq!(w.signal.row(c), expect.as_slice());
            }
        }
    }

    #[test]
    fn segment_normalization() {
        let sig = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![7.0, 7.0, 7.0]]).unwrap();
        let w = TrainingWindow {
            start_frame: 0,
            signal: sig,
            labels: LabelVector::new(100.0, vec![0, 1, 1]).unwrap(),
            session_id: "s".into(),
        };
        let n = normalize_segment(&w);
        let s = (2.0f64 / 3.0).sqrt();
        for (o, e) in n.signal.row(0).iter().zip([-1.0 / s, 0.0, 1.0 / s]) {
            assert!((o - e).abs() < 1e-6);
        }
        assert_eq!(n.signal.row(1), &[0.0, 0.0, 0.0]);
        assert_eq!(n.labels, w.labels);
        let again = normalize_segment(&n);
        for (a, b) in again.signal.data().iter().zip(n.signal.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    fn track() -> impl Strategy<Value = EventTrack> {
        prop::collection::vec((0.0f64..2.0, 0.005f64..3.0), 0..10).prop_map(|gaps| {
            let mut t = 0.0;
            EventTrack::new(
                gaps.into_iter()
                    .map(|(gap, dur)| {
                        let on = t + gap;
                        t = on + dur;
                        Interval::new(on, t)
                    })
                    .collect(),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn jitter_bound_holds(ev in track(), seed in any::<u64>(), j in 0u32..4) {
            let out = jitter_onsets(&ev, j, 100.0, &mut from_seed(seed));
            prop_assert_eq!(out.len(), ev.len());
            for (a, b) in ev.intervals().iter().zip(out.intervals()) {
                prop_assert_eq!(a.offset_s, b.offset_s);
                prop_assert!((a.onset_s - b.onset_s).abs() <= f64::from(j) / 100.0 + 1e-9);
            }
        }

        #[test]
        fn windows_cover_session_and_align_labels(
            ev in track(),
            n in 1200usize..5000,
            seed in any::<u64>(),
        ) {
            let rec = flat_recording(n, 1);
            let cfg = WindowingConfig::default();
            let ws = extract_windows(&rec, &ev, &cfg, LabelMode::Train, "s", &mut from_seed(seed)).unwrap();
            prop_assert_eq!(ws.len(), (n - 1200) / 600 + 1);
            // replay the same jitter draws to build session-level labels
            let mut replay = from_seed(seed);
            for (k, w) in ws.iter().enumerate() {
                prop_assert_eq!(w.start_frame, k * 600);
                prop_assert!(w.start_frame + w.len() <= n);
                let jittered = jitter_onsets(&ev, 2, 100.0, &mut replay);
                let full = rasterize_labels(&jittered, 100.0, n);
                prop_assert_eq!(&w.labels, &full.slice(w.start_frame, 1200));
            }
            let again = extract_windows(&rec, &ev, &cfg, LabelMode::Train, "s", &mut from_seed(seed)).unwrap();
            prop_assert_eq!(ws, again);
        }
    }
}
