use proptest::prelude::*;

use super::*;

fn ps(v: &[f64]) -> ProbabilitySequence {
    ProbabilitySequence::new(100.0, v.to_vec())
}

fn lv(v: &[u8]) -> LabelVector {
    LabelVector::new(100.0, v.to_vec()).unwrap()
}

#[test]
fn grid_has_99_points_on_hundredths() {
    let g = threshold_grid();
    assert_eq!(g.len(), 99);
    assert_eq!(g[0], 0.01);
    assert_eq!(g[49], 0.5);
    assert_eq!(g[98], 0.99);
}

#[test]
fn sweep_perfect_band() {
    let s = sweep_thresholds(&ps(&[0.2, 0.4, 0.6, 0.8]), &lv(&[0, 0, 1, 1])).unwrap();
    assert_eq!(s.len(), 99);
    for (k, &(tau, f1)) in s.iter().enumerate() {
        let k = k + 1;
        if (41..=60).contains(&k) {
            assert_eq!(f1, 1.0, "tau {tau}");
        } else {
            assert!(f1 < 1.0, "tau {tau}");
        }
    }
    assert_eq!(sweep_best(&s), Some((0.41, 1.0)));
}

#[test]
fn sweep_constant_against_all_speech() {
    let s = sweep_thresholds(&ps(&[0.5; 6]), &lv(&[1; 6])).unwrap();
    for (tau, f1) in s {
        let expect = if tau <= 0.5 { 0.5 } else { 0.0 };
        assert_eq!(f1, expect, "tau {tau}");
    }
}

fn cand(epoch: u32, loss: f64, trace: &[f64]) -> Candidate {
    Candidate {
        epoch,
        checkpoint: format!("ckpt_epoch_{epoch}.mebm"),
        validation_loss: loss,
        trace: ps(trace),
    }
}

#[test]
fn selection_prefers_higher_f1_then_lower_loss() {
    let truth = lv(&[0, 0, 1, 1, 1]);
    // epoch 1 cannot separate the classes, epoch 2 can
    let a = cand(1, 0.1, &[0.3, 0.6, 0.5, 0.7, 0.9]);
    let b = cand(2, 0.2, &[0.1, 0.2, 0.6, 0.7, 0.9]);
    let s = select_best(&[a.clone(), b.clone()], &truth).unwrap();
    assert_eq!((s.epoch, s.f1_macro, s.threshold), (2, 1.0, 0.21));
    // identical traces: the lower validation loss wins
    let c = cand(3, 0.05, &b.trace.values);
    let s = select_best(&[b.clone(), c.clone()], &truth).unwrap();
    assert_eq!(s.epoch, 3);
    let s2 = select_best(&[c, b], &truth).unwrap();
    assert_eq!(s, s2);
    assert!(select_best(&[], &truth).is_err());
}

#[test]
fn selection_text_round_trip() {
    let s = Selection {
        epoch: 4,
        checkpoint: "ckpt_epoch_4.mebm".into(),
        validation_loss: 0.061_234_5,
        threshold: 0.37,
        f1_macro: 0.912_345_678,
    };
    let text = s.to_text();
    assert!(text.contains("threshold=0.37\n"));
    let back = Selection::from_text(&text).unwrap();
    assert_eq!(back.to_text(), text);
}

#[test]
fn merge_examples() {
    let w = |v: &[f64]| ps(v);
    let m = merge_overlaps(&[(0, w(&[0.2, 0.2])), (1, w(&[0.6, 0.6]))], 3).unwrap();
    assert_eq!(m.values, vec![0.2, 0.4, 0.6]);
    let tiled = merge_overlaps(&[(0, w(&[0.1, 0.2])), (2, w(&[0.3, 0.4]))], 4).unwrap();
    assert_eq!(tiled.values, vec![0.1, 0.2, 0.3, 0.4]);
    // trailing remainder copies the last covered frame
    let tail = merge_overlaps(&[(0, w(&[0.1, 0.7]))], 5).unwrap();
    assert_eq!(tail.values, vec![0.1, 0.7, 0.7, 0.7, 0.7]);
    assert!(merge_overlaps(&[], 5).is_err());
}

#[test]
fn merge_coverage_counts_for_two_windows() {
    let a = ps(&vec![0.2; 1200]);
    let b = ps(&vec![0.8; 1200]);
    let m = merge_overlaps(&[(0, a), (600, b)], 1800).unwrap();
    for (i, &v) in m.values.iter().enumerate() {
        let expect = match i {
            0..600 => 0.2,
            600..1200 => 0.5,
            _ => 0.8,
        };
        assert!((v - expect).abs() < 1e-15, "frame {i}");
    }
}

#[test]
fn resample_examples() {
    let p = ProbabilitySequence::new(1.0, vec![0.0, 1.0]);
    let r = resample_probs(&p, 4.0).unwrap();
    assert_eq!(r.values, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(r.frame_rate_hz, 4.0);
    let q = ps(&[0.1, 0.9, 0.4]);
    assert_eq!(resample_probs(&q, 100.0).unwrap(), q);
    let c = resample_probs(&ps(&[0.3; 50]), 250.0).unwrap();
    assert_eq!(c.len(), 124);
    assert!(c.values.iter().all(|&v| (v - 0.3).abs() < 1e-15));
    assert!(resample_probs(&ps(&[0.3]), 250.0).is_err());
    assert!(resample_probs(&ps(&[0.3, 0.4]), 10.0).is_err());
}

#[test]
fn trace_and_label_text_round_trip() {
    let p = ProbabilitySequence::new(250.0, vec![0.0, 0.123_456_7, 1.0, 0.5]);
    let text = trace_to_text(&p);
    assert_eq!(text, "rate_hz=250\n0.000000\n0.123457\n1.000000\n0.500000\n");
    let back = trace_from_text(&text).unwrap();
    assert_eq!(trace_to_text(&back), text);
    assert!(trace_from_text("rate=1\n0.5\n").is_err());
    assert!(trace_from_text("rate_hz=100\n1.5\n").is_err());

    let l = lv(&[0, 1, 1, 0]);
    let lt = labels_to_text(&l);
    assert_eq!(lt, "rate_hz=100\n0\n1\n1\n0\n");
    assert_eq!(labels_from_text(&lt).unwrap(), l);
    assert!(labels_from_text("rate_hz=100\n2\n").is_err());
}

fn brute_sweep(p: &[f64], t: &[u8]) -> Vec<(f64, f64)> {
    (1..=99)
        .map(|k| {
            let tau = k as f64 / 100.0;
            let pred: Vec<u8> = p.iter().map(|&v| u8::from(v >= tau)).collect();
            let c = Confusion::from_values(&pred, t).unwrap();
            (tau, c.f1_macro())
        })
        .collect()
}

fn probs_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (1usize..80).prop_flat_map(|n| {
        (
            prop::collection::vec(
                prop_oneof![0.0f64..1.0, (0u32..=100).prop_map(|k| f64::from(k) / 100.0)],
                n,
            ),
            prop::collection::vec(0u8..2, n),
        )
    })
}

proptest! {
    #[test]
    fn sweep_matches_brute_force((p, t) in probs_and_labels()) {
        let s = sweep_thresholds(&ps(&p), &lv(&t)).unwrap();
        let b = brute_sweep(&p, &t);
        prop_assert_eq!(&s, &b);
        let best = b.iter().map(|x| x.1).fold(f64::MIN, f64::max);
        prop_assert_eq!(sweep_best(&s).unwrap().1, best);
    }

    #[test]
    fn threshold_is_monotone((p, _t) in probs_and_labels()) {
        let mut prev: Option<Vec<u8>> = None;
        for tau in threshold_grid() {
            let cur = apply_threshold(&ps(&p), tau).values;
            if let Some(prev) = &prev {
                prop_assert!(cur.iter().zip(prev).all(|(c, p)| c <= p));
            }
            prev = Some(cur);
        }
    }

    #[test]
    fn select_best_matches_exhaustive_search(
        (traces, t, losses, perm) in (4usize..40).prop_flat_map(|n| (
            prop::collection::vec(prop::collection::vec((0u32..=20).prop_map(|k| f64::from(k) / 20.0), n), 1..6),
            prop::collection::vec(0u8..2, n),
            prop::collection::vec((0u32..4).prop_map(|k| f64::from(k) / 10.0), 6),
            Just(()).prop_perturb(|_, mut rng| rng.random::<u64>()),
        ))
    ) {
        let truth = lv(&t);
        let cands: Vec<Candidate> = traces
            .iter()
            .enumerate()
            .map(|(i, tr)| cand(i as u32 + 1, losses[i], tr))
            .collect();
        let got = select_best(&cands, &truth).unwrap();
        let mut all = Vec::new();
        for c in &cands {
            for (tau, f1) in brute_sweep(&c.trace.values, &t) {
                all.push((f1, c.validation_loss, tau, c.epoch));
            }
        }
        let best = all
            .iter()
            .copied()
            .min_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)).then(a.3.cmp(&b.3)))
            .unwrap();
        prop_assert_eq!((got.f1_macro, got.validation_loss, got.threshold, got.epoch), best);
        let mut shuffled = cands.clone();
        let k = (perm as usize) % shuffled.len();
        shuffled.rotate_left(k);
        shuffled.reverse();
        prop_assert_eq!(select_best(&shuffled, &truth).unwrap(), got);
    }

    #[test]
    fn merge_within_contributing_range(
        n_win in 1usize..6,
        len in 2usize..20,
        step in 1usize..20,
        seed in any::<u64>(),
    ) {
        use rand::{Rng as _, SeedableRng};
        let mut rng = crate::rng::Rng::seed_from_u64(seed);
        let wins: Vec<(usize, ProbabilitySequence)> = (0..n_win)
            .map(|w| (w * step, ps(&(0..len).map(|_| rng.random_range(0.0..1.0)).collect::<Vec<_>>())))
            .collect();
        let session = (n_win - 1) * step + len + 3;
        let m = merge_overlaps(&wins, session).unwrap();
        prop_assert_eq!(m.len(), session);
        for (f, &v) in m.values.iter().enumerate() {
            let contrib: Vec<f64> = wins
                .iter()
                .filter(|(s, p)| f >= *s && f < s + p.len())
                .map(|(s, p)| p.values[f - s])
                .collect();
            if !contrib.is_empty() {
                let lo = contrib.iter().copied().fold(f64::MAX, f64::min);
                let hi = contrib.iter().copied().fold(f64::MIN, f64::max);
                prop_assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
            }
        }
    }

    #[test]
    fn trace_round_trip_is_byte_identical(
        v in prop::collection::vec(0.0f64..=1.0, 0..50),
        rate in prop_oneof![Just(100.0), Just(250.0), 1.0f64..1000.0],
    ) {
        let text = trace_to_text(&ProbabilitySequence::new(rate, v));
        let back = trace_from_text(&text).unwrap();
        prop_assert_eq!(trace_to_text(&back), text);
    }
}
