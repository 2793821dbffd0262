use std::fmt::Write as _;

use crate::data::LabelVector;
use crate::error::{Error, Result};
use crate::net::ProbabilitySequence;

/// Frame `k` is speech iff `p_k ≥ tau`.
pub fn apply_threshold(p: &ProbabilitySequence, tau: f64) -> LabelVector {
    LabelVector {
        frame_rate_hz: p.frame_rate_hz,
        values: p.values.iter().map(|&v| u8::from(v >= tau)).collect(),
    }
}

/// Counts with speech (1) as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassStats {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    pub fn from_values(pred: &[u8], truth: &[u8]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::dim(format!(
                "{} predictions for {} truth frames",
                pred.len(),
                truth.len()
            )));
        }
        if pred.is_empty() {
            return Err(Error::Degenerate("no frames to score".into()));
        }
        let mut c = Confusion::default();
        for (&p, &t) in pred.iter().zip(truth) {
            match (p != 0, t != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn new(pred: &LabelVector, truth: &LabelVector) -> Result<Self> {
        Self::from_values(&pred.values, &truth.values)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same counts with the classes swapped.
    pub fn flipped(&self) -> Self {
        Self {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    /// Stats with `class` (0 or 1) as the positive class. F1 is
    /// `2TP / (2TP + FP + FN)`, and 0 when that denominator is 0.
    pub fn class_stats(&self, class: u8) -> ClassStats {
        let c = if class == 0 { self.flipped() } else { *self };
        ClassStats {
            precision: ratio(c.tp, c.tp + c.fp),
            recall: ratio(c.tp, c.tp + c.fn_),
            f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        }
    }

    pub fn f1_macro(&self) -> f64 {
        (self.class_stats(0).f1 + self.class_stats(1).f1) / 2.0
    }

    /// Recall of `class`; a class absent from the truth scores 1 when it is
    /// also never predicted and 0 otherwise.
    fn recall_or_absent(&self, class: u8) -> f64 {
        let c = if class == 0 { self.flipped() } else { *self };
        if c.tp + c.fn_ == 0 {
            if c.tp + c.fp == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            c.tp as f64 / (c.tp + c.fn_) as f64
        }
    }

    /// Balanced accuracy, the mean per-class recall.
    pub fn acc_macro(&self) -> f64 {
        (self.recall_or_absent(0) + self.recall_or_absent(1)) / 2.0
    }

    /// True when the truth lacks one of the two classes.
    pub fn class_absent(&self) -> bool {
        self.tp + self.fn_ == 0 || self.tn + self.fp == 0
    }
}

pub fn f1_macro(pred: &LabelVector, truth: &LabelVector) -> Result<f64> {
    Ok(Confusion::new(pred, truth)?.f1_macro())
}

pub fn acc_macro(pred: &LabelVector, truth: &LabelVector) -> Result<f64> {
    Ok(Confusion::new(pred, truth)?.acc_macro())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub f1_macro: f64,
    pub acc_macro: f64,
    /// Indexed by class: silence, speech.
    pub per_class: [ClassStats; 2],
    pub counts: Confusion,
    /// Set when the truth lacks a class and `acc_macro` used the fallback.
    pub class_absent: bool,
    pub threshold: Option<f64>,
    pub checkpoint: Option<String>,
}

impl MetricReport {
    pub fn from_counts(counts: Confusion) -> Self {
        Self {
            f1_macro: counts.f1_macro(),
            acc_macro: counts.acc_macro(),
            per_class: [counts.class_stats(0), counts.class_stats(1)],
            counts,
            class_absent: counts.class_absent(),
            threshold: None,
            checkpoint: None,
        }
    }

    pub fn new(pred: &LabelVector, truth: &LabelVector) -> Result<Self> {
        Ok(Self::from_counts(Confusion::new(pred, truth)?))
    }

    /// Flat `key=value` lines. Reals have six decimals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let c = &self.counts;
        let _ = writeln!(s, "f1_macro={:.6}", self.f1_macro);
        let _ = writeln!(s, "acc_macro={:.6}", self.acc_macro);
        let _ = writeln!(s, "tp={}", c.tp);
        let _ = writeln!(s, "fp={}", c.fp);
        let _ = writeln!(s, "fn={}", c.fn_);
        let _ = writeln!(s, "tn={}", c.tn);
        for (name, st) in ["silence", "speech"].iter().zip(&self.per_class) {
            let _ = writeln!(s, "precision_{name}={:.6}", st.precision);
            let _ = writeln!(s, "recall_{name}={:.6}", st.recall);
            let _ = writeln!(s, "f1_{name}={:.6}", st.f1);
        }
        let _ = writeln!(s, "class_absent={}", self.class_absent);
        match self.threshold {
            Some(t) => {
                let _ = writeln!(s, "threshold={t:.6}");
            }
            None => s.push_str("threshold=none\n"),
        }
        let _ = writeln!(s, "checkpoint={}", self.checkpoint.as_deref().unwrap_or("none"));
        s
    }

    /// Parses [`to_text`](Self::to_text) output; metrics are recomputed
    /// from the counts.
    pub fn from_text(text: &str) -> Result<Self> {
        let kv = crate::kv::parse_kv(text)?;
        let get = |k: &str| kv.get(k).ok_or_else(|| Error::Format(format!("report lacks {k}")));
        let count =
            |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| Error::Format(format!("bad count for {k}"))) };
        let counts = Confusion {
            tp: count("tp")?,
            fp: count("fp")?,
            fn_: count("fn")?,
            tn: count("tn")?,
        };
        let mut r = Self::from_counts(counts);
        r.threshold = match get("threshold")?.as_str() {
            "none" => None,
            v => Some(v.parse().map_err(|_| Error::Format(format!("bad threshold {v}")))?),
        };
        r.checkpoint = match get("checkpoint")?.as_str() {
            "none" => None,
            v => Some(v.to_string()),
        };
        Ok(r)
    }
}
