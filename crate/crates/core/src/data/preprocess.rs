//! Session-level preprocessing: channel selection, resampling and
//! temporal normalization.

use super::recording::{ChannelKind, Recording};
use crate::error::{Error, Result};

/// Epsilon added to the standard deviation in every z-score.
pub const NORM_EPS: f64 = 1e-8;

/// Keeps the rows of `kind`, preserving their relative order.
pub fn select_channels(rec: &Recording, kind: ChannelKind) -> Result<Recording> {
    let (channels, rows): (Vec<_>, Vec<_>) = rec
        .channels()
        .iter()
        .zip(rec.rows())
        .filter(|(ch, _)| ch.kind == kind)
        .map(|(ch, row)| (ch.clone(), row.to_vec()))
        .unzip();
    if channels.is_empty() {
        return Err(Error::EmptySelection(kind.to_string()));
    }
    Recording::from_rows(rec.sample_rate_hz(), channels, rows)
}

/// Output length of [`resample`].
pub fn resampled_len(n_samples: usize, from_hz: f64, to_hz: f64) -> usize {
    (n_samples as f64 * to_hz / from_hz).round() as usize
}

/// Resamples every channel onto a uniform `target_hz` grid anchored at t = 0.
///
/// Downsampling first applies a centred moving average of width
/// `round(rate / target_hz)`, then linearly interpolates. Equal rates return
/// the input untouched.
pub fn resample(rec: &Recording, target_hz: f64) -> Result<Recording> {
    if !(target_hz.is_finite() && target_hz > 0.0) {
        return Err(Error::config(format!("target rate must be positive, got {target_hz}")));
    }
    let from_hz = rec.sample_rate_hz();
    if target_hz == from_hz {
        return Ok(rec.clone());
    }
    let n_out = resampled_len(rec.n_samples(), from_hz, target_hz);
    if n_out == 0 {
        return Err(Error::Degenerate(format!(
            "resampling {} samples from {from_hz} Hz to {target_hz} Hz leaves no samples",
            rec.n_samples()
        )));
    }
    let width = if target_hz < from_hz {
        (from_hz / target_hz).round() as usize
    } else {
        1
    };
    let rows = rec
        .rows()
        .map(|row| {
            let x: Vec<f64> = row.iter().map(|&v| f64::from(v)).collect();
            let smoothed = moving_average(&x, width);
            interpolate_uniform(&smoothed, from_hz / target_hz, n_out)
                .into_iter()
                .map(|v| v as f32)
                .collect()
        })
        .collect();
    rec.with_rows(target_hz, rows)
}

/// Centred moving average; windows are clipped at the edges and averaged
/// over the samples they actually cover, so constants pass through exactly.
pub(crate) fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 {
        return x.to_vec();
    }
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v;
        prefix.push(acc);
    }
    let back = (width - 1) / 2;
    let fwd = width / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + fwd + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Samples `x` at positions `j * step` (in source-sample units), holding the
/// last value past the end.
pub(crate) fn interpolate_uniform(x: &[f64], step: f64, n_out: usize) -> Vec<f64> {
    let last = x.len() - 1;
    (0..n_out)
        .map(|j| {
            let s = j as f64 * step;
            let lo = s.floor() as usize;
            if lo >= last {
                x[last]
            } else {
                let frac = s - lo as f64;
                x[lo] + (x[lo + 1] - x[lo]) * frac
            }
        })
        .collect()
}

/// Population mean and standard deviation.
pub fn mean_std(x: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.clone().sum::<f64>() / n;
    let var = x.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// `(x - mean) / (std + 1e-8)` in place.
pub fn zscore_in_place(x: &mut [f64]) {
    let (mean, std) = mean_std(x.iter().copied());
    let denom = std + NORM_EPS;
    for v in x {
        *v = (*v - mean) / denom;
    }
}

/// Z-scores each channel over its full length.
pub fn normalize_temporal(rec: &Recording) -> Result<Recording> {
    let rows = rec
        .rows()
        .map(|row| {
            let mut x: Vec<f64> = row.iter().map(|&v| f64::from(v)).collect();
            zscore_in_place(&mut x);
            x.into_iter().map(|v| v as f32).collect()
        })
        .collect();
    rec.with_rows(rec.sample_rate_hz(), rows)
}

/// The session chain: grad channels, then resample, then normalize.
pub fn preprocess_session(rec: &Recording, kind: ChannelKind, target_hz: f64) -> Result<Recording> {
    let selected = select_channels(rec, kind)?;
    let resampled = resample(&selected, target_hz)?;
    normalize_temporal(&resampled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::recording::ChannelMeta;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn rec_from(rate: f64, kinds: &[ChannelKind], rows: Vec<Vec<f32>>) -> Recording {
        let chans = kinds
            .iter()
            .enumerate()
            .map(|(i, &k)| ChannelMeta::new(format!("ch{i}"), k))
            .collect();
        Recording::from_rows(rate, chans, rows).unwrap()
    }

    fn sine(rate: f64, freq: f64, seconds: f64) -> Vec<f32> {
        let n = (rate * seconds).round() as usize;
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / rate).sin() as f32)
            .collect()
    }

    #[test]
    fn selects_matching_rows_in_order() {
        use ChannelKind::*;
        let rec = rec_from(
            100.0,
            &[Grad, Mag, Grad],
            vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]],
        );
        let out = select_channels(&rec, Grad).unwrap();
        assert_eq!(out.n_channels(), 2);
        assert_eq!(out.row(0), rec.row(0));
        assert_eq!(out.row(1), rec.row(2));
        assert_eq!(out.channels()[1].name, "ch2");
        assert_eq!(out.sample_rate_hz(), 100.0);

        let all = rec_from(100.0, &[Grad, Grad], vec![vec![1.0], vec![2.0]]);
        assert_eq!(select_channels(&all, Grad).unwrap(), all);
        assert!(matches!(select_channels(&all, Mag), Err(Error::EmptySelection(_))));
    }

    #[test]
    fn constant_survives_downsampling() {
        let rec = rec_from(250.0, &[ChannelKind::Grad], vec![vec![5.0; 2500]]);
        let out = resample(&rec, 100.0).unwrap();
        assert_eq!(out.n_samples(), 1000);
        assert!(out.row(0).iter().all(|&v| (f64::from(v) - 5.0).abs() <= 1e-9));
    }

    #[test]
    fn same_rate_is_identity() {
        let rec = rec_from(100.0, &[ChannelKind::Grad], vec![sine(100.0, 3.0, 1.0)]);
        assert_eq!(resample(&rec, 100.0).unwrap(), rec);
    }

    #[test]
    fn degenerate_output_length() {
        let rec = rec_from(1000.0, &[ChannelKind::Grad], vec![vec![1.0; 3]]);
        assert!(matches!(resample(&rec, 100.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn one_hz_sine_250_to_100() {
        let rec = rec_from(250.0, &[ChannelKind::Grad], vec![sine(250.0, 1.0, 10.0)]);
        let out = resample(&rec, 100.0).unwrap();
        assert_eq!(out.n_samples(), 1000);
        let worst = out
            .row(0)
            .iter()
            .enumerate()
            .map(|(j, &v)| (f64::from(v) - (2.0 * PI * j as f64 / 100.0).sin()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 0.05, "max error {worst}");
    }

    #[test]
    fn zscore_of_one_two_three() {
        // two-pass oracle: mean 2, population variance 2/3
        let std = (2.0f64 / 3.0).sqrt();
        let expect = [-1.0 / std, 0.0, 1.0 / std];
        let rec = rec_from(100.0, &[ChannelKind::Grad], vec![vec![1.0, 2.0, 3.0]]);
        let out = normalize_temporal(&rec).unwrap();
        for (o, e) in out.row(0).iter().zip(expect) {
            assert!((f64::from(*o) - e).abs() < 1e-6);
        }
        assert!((expect[2] - 1.224745).abs() < 1e-6);
    }

    #[test]
    fn constant_channel_maps_to_zero() {
        let rec = rec_from(100.0, &[ChannelKind::Grad], vec![vec![7.0; 3]]);
        let out = normalize_temporal(&rec).unwrap();
        assert_eq!(out.row(0), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn round_trip_error_at_band_edge() {
        let n = 2500;
        let row = sine(250.0, 10.0, 10.0);
        let rec = rec_from(250.0, &[ChannelKind::Grad], vec![row.clone()]);
        let back = resample(&resample(&rec, 100.0).unwrap(), 250.0).unwrap();
        let worst = back.row(0)[5..n - 5]
            .iter()
            .zip(&row[5..n - 5])
            .map(|(a, b)| f64::from((a - b).abs()))
            .fold(0.0, f64::max);
        let interp = 1.0 - (PI * 10.0 / 100.0).cos();
        let smooth = 1.0 - (3.0 * PI * 10.0 / 250.0).sin() / (3.0 * (PI * 10.0 / 250.0).sin());
        assert!(worst > interp, "{worst}");
        assert!(worst <= interp + smooth + 1e-3, "{worst}");
    }

    proptest! {
        #[test]
        fn normalize_moments_and_idempotence(
            row in prop::collection::vec(-1000.0f32..1000.0, 2..300),
        ) {
            let rec = rec_from(100.0, &[ChannelKind::Grad], vec![row]);
            let (_, std_in) = mean_std(rec.row(0).iter().map(|&v| f64::from(v)));
            prop_assume!(std_in >= 1e-3);
            let once = normalize_temporal(&rec).unwrap();
            let (m, s) = mean_std(once.row(0).iter().map(|&v| f64::from(v)));
            prop_assert!(m.abs() <= 1e-6, "mean {m}");
            prop_assert!((s - 1.0).abs() <= 1e-4, "std {s}");
            let twice = normalize_temporal(&once).unwrap();
            for (a, b) in once.row(0).iter().zip(twice.row(0)) {
                prop_assert!((a - b).abs() <= 1e-6);
            }
        }

        #[test]
        fn resample_output_length(n in 1usize..2000, from in 50.0f64..1000.0, to in 50.0f64..1000.0) {
            let rec = rec_from(from, &[ChannelKind::Grad], vec![vec![0.0; n]]);
            match resample(&rec, to) {
                Ok(out) => prop_assert_eq!(out.n_samples(), if from == to { n } else { resampled_len(n, from, to) }),
                Err(Error::Degenerate(_)) => prop_assert_eq!(resampled_len(n, from, to), 0),
                Err(e) => prop_assert!(false, "{e}"),
            }
        }

        #[test]
        fn down_then_up_reconstructs_band_limited_sine(
            freq_frac in 0.02f64..=0.16,
            phase in 0.0f64..(2.0 * PI),
        ) {
            // target 100 Hz, Nyquist 50 Hz. Above ~0.17 x Nyquist the
            // linear-interpolation error (1 - cos(pi f / 100)) plus the
            // width-3 smoothing loss exceeds 0.05; see
            // `round_trip_error_at_band_edge`.
            let freq = freq_frac * 50.0;
            let n = 2500;
            let row: Vec<f32> = (0..n)
                .map(|i| (2.0 * PI * freq * i as f64 / 250.0 + phase).sin() as f32)
                .collect();
            let rec = rec_from(250.0, &[ChannelKind::Grad], vec![row.clone()]);
            let back = resample(&resample(&rec, 100.0).unwrap(), 250.0).unwrap();
            prop_assert_eq!(back.n_samples(), n);
            // skip the edge where the clipped smoothing window and the
            // hold-last extrapolation apply
            let worst = back.row(0)[5..n - 5]
                .iter()
                .zip(&row[5..n - 5])
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max);
            prop_assert!(worst <= 0.05, "freq {freq} max error {worst}");
        }
    }
}
