//! Speech intervals and frame labels.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Half-open speech interval `[onset_s, offset_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub onset_s: f64,
    pub offset_s: f64,
}

impl Interval {
    pub fn new(onset_s: f64, offset_s: f64) -> Self {
        Self { onset_s, offset_s }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.onset_s && t < self.offset_s
    }
}

/// Sorted, non-overlapping speech intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventTrack {
    intervals: Vec<Interval>,
}

impl EventTrack {
    pub fn new(intervals: Vec<Interval>) -> Result<Self> {
        for (i, iv) in intervals.iter().enumerate() {
            if !(iv.onset_s.is_finite() && iv.offset_s.is_finite()) {
                return Err(Error::Format(format!("interval {i} is not finite")));
            }
            if !(0.0 <= iv.onset_s && iv.onset_s < iv.offset_s) {
                return Err(Error::Format(format!(
                    "interval {i} ({}, {}) violates 0 <= onset < offset",
                    iv.onset_s, iv.offset_s
                )));
            }
            if i > 0 && iv.onset_s < intervals[i - 1].offset_s {
                return Err(Error::Format(format!(
                    "interval {i} overlaps or precedes interval {}",
                    i - 1
                )));
            }
        }
        Ok(Self { intervals })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Tab-separated text, one `onset_s<TAB>offset_s` per line.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# onset_s\toffset_s\n");
        for iv in &self.intervals {
            let _ = writeln!(s, "{}\t{}", iv.onset_s, iv.offset_s);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut intervals = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Format(format!(
                    "events line {}: expected onset<TAB>offset",
                    lineno + 1
                )));
            };
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("events line {}: {e}", lineno + 1)))
            };
            let iv = Interval::new(parse(a)?, parse(b)?);
            if let Some(prev) = intervals.last() {
                let prev: &Interval = prev;
                if iv.onset_s <= prev.onset_s {
                    return Err(Error::Format(format!(
                        "events line {}: onsets must be strictly increasing",
                        lineno + 1
                    )));
                }
            }
            intervals.push(iv);
        }
        Self::new(intervals)
    }
}

pub fn load_events(path: impl AsRef<Path>) -> Result<EventTrack> {
    let text = fs::read_to_string(path)?;
    EventTrack::from_text(&text)
}

pub fn save_events(events: &EventTrack, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, events.to_text())?;
    Ok(())
}

/// Binary per-frame labels at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector {
    pub frame_rate_hz: f64,
    pub values: Vec<u8>,
}

impl LabelVector {
    pub fn new(frame_rate_hz: f64, values: Vec<u8>) -> Result<Self> {
        if let Some(v) = values.iter().find(|&&v| v > 1) {
            return Err(Error::Format(format!("label value {v} is not 0 or 1")));
        }
        Ok(Self { frame_rate_hz, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn slice(&self, start: usize, len: usize) -> LabelVector {
        LabelVector {
            frame_rate_hz: self.frame_rate_hz,
            values: self.values[start..start + len].to_vec(),
        }
    }
}

/// Frame `k` is speech iff its centre `(k + 0.5) / rate` lies inside an interval.
pub fn rasterize_labels(events: &EventTrack, frame_rate_hz: f64, n_frames: usize) -> LabelVector {
    rasterize_range(events, frame_rate_hz, 0, n_frames)
}

/// Rasterizes frames `start..start + n_frames` of the session timeline.
pub fn rasterize_range(events: &EventTrack, frame_rate_hz: f64, start: usize, n_frames: usize) -> LabelVector {
    let mut values = vec![0u8; n_frames];
    let ivs = events.intervals();
    let mut j = 0;
    for (k, v) in values.iter_mut().enumerate() {
        let centre = ((start + k) as f64 + 0.5) / frame_rate_hz;
        while j < ivs.len() && ivs[j].offset_s <= centre {
            j += 1;
        }
        if j < ivs.len() && ivs[j].contains(centre) {
            *v = 1;
        }
    }
    LabelVector { frame_rate_hz, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn short_interval_at_100hz() {
        let ev = EventTrack::new(vec![Interval::new(0.0, 0.05)]).unwrap();
        let l = rasterize_labels(&ev, 100.0, 10);
        assert_eq!(l.values, vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn empty_and_full() {
        assert!(rasterize_labels(&EventTrack::empty(), 100.0, 7)
            .values
            .iter()
            .all(|&v| v == 0));
        let ev = EventTrack::new(vec![Interval::new(0.0, 100.0)]).unwrap();
        assert!(rasterize_labels(&ev, 100.0, 50).values.iter().all(|&v| v == 1));
    }

    #[test]
    fn intervals_beyond_span_are_truncated() {
        let ev = EventTrack::new(vec![Interval::new(0.08, 5.0)]).unwrap();
        let l = rasterize_labels(&ev, 100.0, 10);
        assert_eq!(l.values, vec![0, 0, 0, 0, 0, 0, 0, 0, 1, 1]);
    }

    #[test]
    fn invalid_tracks_rejected() {
        assert!(EventTrack::new(vec![Interval::new(1.0, 1.0)]).is_err());
        assert!(EventTrack::new(vec![Interval::new(-0.1, 1.0)]).is_err());
        assert!(EventTrack::new(vec![Interval::new(0.0, 1.0), Interval::new(0.5, 2.0)]).is_err());
    }

    #[test]
    fn text_format() {
        let text = "# header\n0.5\t1.25\n# mid comment\n2\t3.5\n";
        let ev = EventTrack::from_text(text).unwrap();
        assert_eq!(ev.intervals(), &[Interval::new(0.5, 1.25), Interval::new(2.0, 3.5)]);
        assert_eq!(EventTrack::from_text(&ev.to_text()).unwrap(), ev);
        assert!(EventTrack::from_text("1\t2\n1\t3\n").is_err());
        assert!(EventTrack::from_text("1 2\n").is_err());
    }

    fn track() -> impl Strategy<Value = EventTrack> {
        prop::collection::vec((0.0f64..1.0, 0.01f64..1.0), 0..8).prop_map(|gaps| {
            let mut t = 0.0;
            let ivs = gaps
                .into_iter()
                .map(|(gap, dur)| {
                    let on = t + gap;
                    t = on + dur;
                    Interval::new(on, t)
                })
                .collect();
            EventTrack::new(ivs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn frame_count_and_monotone_growth(ev in track(), n in 1usize..400, grow in 0.0f64..0.5) {
            let base = rasterize_labels(&ev, 100.0, n);
            prop_assert_eq!(base.len(), n);
            if let Some(last) = ev.intervals().last() {
                let mut ivs = ev.intervals().to_vec();
                let k = ivs.len() - 1;
                ivs[k] = Interval::new(last.onset_s, last.offset_s + grow);
                let grown = rasterize_labels(&EventTrack::new(ivs).unwrap(), 100.0, n);
                for (a, b) in base.values.iter().zip(&grown.values) {
                    prop_assert!(b >= a);
                }
            }
        }

        #[test]
        fn range_matches_full_slice(ev in track(), start in 0usize..200, len in 1usize..200) {
            let full = rasterize_labels(&ev, 100.0, start + len);
            prop_assert_eq!(rasterize_range(&ev, 100.0, start, len), full.slice(start, len));
        }
    }
}
