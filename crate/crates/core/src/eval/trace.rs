//! Text formats for per-frame outputs: a `rate_hz=<float>` header, then one
//! value per line. Probabilities carry six decimals; labels are `0`/`1`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::data::LabelVector;
use crate::error::{Error, Result};
use crate::net::ProbabilitySequence;

fn header(text: &str) -> Result<(f64, std::str::Lines<'_>)> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| Error::Format("empty trace file".into()))?;
    let rate = first
        .strip_prefix("rate_hz=")
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|r| r.is_finite() && *r > 0.0)
        .ok_or_else(|| Error::Header(format!("expected rate_hz=<positive float>, got {first:?}")))?;
    Ok((rate, lines))
}

pub fn trace_to_text(p: &ProbabilitySequence) -> String {
    let mut s = String::with_capacity(16 + 9 * p.len());
    let _ = writeln!(s, "rate_hz={}", p.frame_rate_hz);
    for v in &p.values {
        let _ = writeln!(s, "{v:.6}");
    }
    s
}

pub fn trace_from_text(text: &str) -> Result<ProbabilitySequence> {
    let (rate, lines) = header(text)?;
    let values = lines
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| (0.0..=1.0).contains(v))
                .ok_or_else(|| Error::Format(format!("line {}: bad probability {l:?}", i + 2)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbabilitySequence::new(rate, values))
}

pub fn save_trace(p: &ProbabilitySequence, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, trace_to_text(p))?;
    Ok(())
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<ProbabilitySequence> {
    trace_from_text(&fs::read_to_string(path)?)
}

pub fn labels_to_text(l: &LabelVector) -> String {
    let mut s = String::with_capacity(16 + 2 * l.len());
    let _ = writeln!(s, "rate_hz={}", l.frame_rate_hz);
    for v in &l.values {
        let _ = writeln!(s, "{v}");
    }
    s
}

pub fn labels_from_text(text: &str) -> Result<LabelVector> {
    let (rate, lines) = header(text)?;
    let values = lines
        .enumerate()
        .map(|(i, l)| match l.trim() {
            "0" => Ok(0),
            "1" => Ok(1),
            _ => Err(Error::Format(format!("line {}: expected 0 or 1, got {l:?}", i + 2))),
        })
        .collect::<Result<Vec<u8>>>()?;
    LabelVector::new(rate, values)
}

pub fn save_labels(l: &LabelVector, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, labels_to_text(l))?;
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    labels_from_text(&fs::read_to_string(path)?)
}
