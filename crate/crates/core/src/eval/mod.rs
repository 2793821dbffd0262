//! Thresholding, macro metrics, checkpoint × threshold selection, and
//! session-level probability traces.

mod merge;
mod metrics;
mod trace;

use std::cmp::Ordering;
use std::fmt::Write as _;

pub use merge::{merge_overlaps, resample_probs};
pub use metrics::{acc_macro, apply_threshold, f1_macro, ClassStats, Confusion, MetricReport};
pub use trace::{
    labels_from_text, labels_to_text, load_labels, load_trace, save_labels, save_trace, trace_from_text, trace_to_text,
};

use crate::data::LabelVector;
use crate::error::{Error, Result};
use crate::net::ProbabilitySequence;

pub const N_THRESHOLDS: usize = 99;

/// `τ_k = k / 100` for `k = 1..=99`.
pub fn threshold_grid() -> [f64; N_THRESHOLDS] {
    std::array::from_fn(|i| (i + 1) as f64 / 100.0)
}

/// F1_macro at every grid threshold, ascending in τ.
pub fn sweep_thresholds(p: &ProbabilitySequence, truth: &LabelVector) -> Result<Vec<(f64, f64)>> {
    if p.len() != truth.len() {
        return Err(Error::dim(format!(
            "trace of {} frames against {} labels",
            p.len(),
            truth.len()
        )));
    }
    threshold_grid()
        .into_iter()
        .map(|tau| Ok((tau, f1_macro(&apply_threshold(p, tau), truth)?)))
        .collect()
}

/// Highest F1 in a sweep; the lowest τ wins ties.
pub fn sweep_best(sweep: &[(f64, f64)]) -> Option<(f64, f64)> {
    sweep
        .iter()
        .copied()
        .fold(None, |best: Option<(f64, f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
}

/// One checkpoint's merged validation trace.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub epoch: u32,
    pub checkpoint: String,
    pub validation_loss: f64,
    pub trace: ProbabilitySequence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub epoch: u32,
    pub checkpoint: String,
    pub validation_loss: f64,
    pub threshold: f64,
    pub f1_macro: f64,
}

impl Selection {
    /// Total order used for selection: higher F1, then lower validation
    /// loss, then lower τ, then lower epoch.
    pub fn rank(&self, other: &Self) -> Ordering {
        other
            .f1_macro
            .total_cmp(&self.f1_macro)
            .then(self.validation_loss.total_cmp(&other.validation_loss))
            .then(self.threshold.total_cmp(&other.threshold))
            .then(self.epoch.cmp(&other.epoch))
    }

    pub fn to_text(&self) -> String {
        format!(
            "checkpoint={}\nepoch={}\nthreshold={:.2}\nf1_macro={:.6}\nvalidation_loss={}\n",
            self.checkpoint, self.epoch, self.threshold, self.f1_macro, self.validation_loss
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let kv = crate::kv::parse_kv(text)?;
        let get = |k: &str| kv.get(k).ok_or_else(|| Error::Format(format!("selection lacks {k}")));
        let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::Format(format!("bad value for {k}"))) };
        Ok(Self {
            checkpoint: get("checkpoint")?.clone(),
            epoch: get("epoch")?.parse().map_err(|_| Error::Format("bad epoch".into()))?,
            validation_loss: num("validation_loss")?,
            threshold: num("threshold")?,
            f1_macro: num("f1_macro")?,
        })
    }
}

/// Full sweep for every candidate, in candidate order.
pub fn sweep_candidates(candidates: &[Candidate], truth: &LabelVector) -> Result<Vec<Vec<(f64, f64)>>> {
    #[cfg(feature = "parallel")]
    let sweeps: Vec<Result<Vec<(f64, f64)>>> = {
        use rayon::prelude::*;
        candidates
            .par_iter()
            .map(|c| sweep_thresholds(&c.trace, truth))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let sweeps: Vec<Result<Vec<(f64, f64)>>> = candidates.iter().map(|c| sweep_thresholds(&c.trace, truth)).collect();
    sweeps.into_iter().collect()
}

/// Argmax of F1_macro over every (candidate, τ) pair, ranked by
/// [`Selection::rank`]. The result does not depend on candidate order.
pub fn select_best(candidates: &[Candidate], truth: &LabelVector) -> Result<Selection> {
    let sweeps = sweep_candidates(candidates, truth)?;
    select_from_sweeps(candidates, &sweeps)
}

pub fn select_from_sweeps(candidates: &[Candidate], sweeps: &[Vec<(f64, f64)>]) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::Degenerate("no checkpoints to select from".into()));
    }
    let mut best: Option<Selection> = None;
    for (c, sweep) in candidates.iter().zip(sweeps) {
        let Some((threshold, f1)) = sweep_best(sweep) else {
            continue;
        };
        let s = Selection {
            epoch: c.epoch,
            checkpoint: c.checkpoint.clone(),
            validation_loss: c.validation_loss,
            threshold,
            f1_macro: f1,
        };
        if best.as_ref().is_none_or(|b| s.rank(b) == Ordering::Less) {
            best = Some(s);
        }
    }
    best.ok_or_else(|| Error::Degenerate("empty sweeps".into()))
}

/// Sweep table: a header, then `epoch<TAB>tau<TAB>f1_macro` rows.
pub fn sweep_table(candidates: &[Candidate], sweeps: &[Vec<(f64, f64)>]) -> String {
    let mut s = String::from("epoch\ttau\tf1_macro\n");
    for (c, sweep) in candidates.iter().zip(sweeps) {
        for (tau, f1) in sweep {
            let _ = writeln!(s, "{}\t{tau:.2}\t{f1:.6}", c.epoch);
        }
    }
    s
}

#[cfg(test)]
mod tests;
