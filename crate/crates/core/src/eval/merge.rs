use crate::error::{Error, Result};
use crate::net::ProbabilitySequence;

/// Session trace from overlapping window predictions: each frame is the
/// mean of every window covering it. Frames no window reaches copy the
/// nearest covered frame, preferring the earlier one on ties.
pub fn merge_overlaps(windows: &[(usize, ProbabilitySequence)], session_len: usize) -> Result<ProbabilitySequence> {
    let Some((_, first)) = windows.first() else {
        return Err(Error::Degenerate("no windows to merge".into()));
    };
    if session_len == 0 {
        return Err(Error::Degenerate("empty session".into()));
    }
    let rate = first.frame_rate_hz;
    let mut sum = vec![0.0; session_len];
    let mut count = vec![0u32; session_len];
    for (start, p) in windows {
        if p.frame_rate_hz != rate {
            return Err(Error::dim("windows at different frame rates"));
        }
        for (i, &v) in p.values.iter().enumerate() {
            if let Some(slot) = sum.get_mut(start + i) {
                *slot += v;
                count[start + i] += 1;
            }
        }
    }
    if count.iter().all(|&c| c == 0) {
        return Err(Error::Degenerate("no window overlaps the session".into()));
    }
    let mut out: Vec<Option<f64>> = sum
        .iter()
        .zip(&count)
        .map(|(&s, &c)| (c > 0).then(|| s / f64::from(c)))
        .collect();

    // distance to the nearest covered frame from each side
    let mut left: Vec<Option<(usize, f64)>> = vec![None; session_len];
    let mut last = None;
    for (i, v) in out.iter().enumerate() {
        if let Some(v) = v {
            last = Some((i, *v));
        }
        left[i] = last;
    }
    let mut next: Option<(usize, f64)> = None;
    for i in (0..session_len).rev() {
        if let Some(v) = out[i] {
            next = Some((i, v));
            continue;
        }
        out[i] = match (left[i], next) {
            (Some((l, lv)), Some((r, rv))) => Some(if i - l <= r - i { lv } else { rv }),
            (Some((_, lv)), None) => Some(lv),
            (None, Some((_, rv))) => Some(rv),
            (None, None) => unreachable!("at least one frame is covered"),
        };
    }
    Ok(ProbabilitySequence::new(
        rate,
        out.into_iter().map(Option::unwrap).collect(),
    ))
}

/// Linear interpolation onto `target_hz` over the same time span, endpoints
/// aligned. The output has `round(span · target_hz) + 1` frames, clipped to
/// `[0, 1]`.
pub fn resample_probs(p: &ProbabilitySequence, target_hz: f64) -> Result<ProbabilitySequence> {
    if !(target_hz.is_finite() && target_hz > 0.0) {
        return Err(Error::config(format!("target rate must be positive, got {target_hz}")));
    }
    if p.len() < 2 {
        return Err(Error::Degenerate("need at least two frames to resample".into()));
    }
    let span = (p.len() - 1) as f64 / p.frame_rate_hz;
    let n = (span * target_hz).round() as usize + 1;
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "{target_hz} Hz leaves fewer than two frames over {span} s"
        )));
    }
    let values = if n == p.len() {
        p.values.clone()
    } else {
        crate::net::ops::upsample_linear(&p.values, n)?
    };
    Ok(ProbabilitySequence::new(
        target_hz,
        values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    ))
}
