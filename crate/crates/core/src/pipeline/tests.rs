use super::*;
use crate::synth::generate_session;

const TINY: &str = "\
c_in = 4
d = 4
n_bm = 1
n_ms = 1
ms_kernel_sizes = 3
lstm_hidden = 2
n_channels = 4
n_informative = 2
duration_s = 36
sample_rate_hz = 200
epochs = 2
batch_size = 4
";

fn make_session(dir: &Path, cfg: &RunConfig, synth_seed: u64) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let mut s = cfg.synth.clone();
    s.seed = synth_seed;
    let (rec, ev) = generate_session(&s).unwrap();
    write_session(dir, &rec, &ev).unwrap();
    dir.to_path_buf()
}

fn tiny_setup(root: &Path) -> RunConfig {
    let mut cfg = RunConfig::from_layers(Some(TINY), []).unwrap();
    cfg.train_sessions = vec![make_session(&root.join("train"), &cfg, 10)];
    cfg.val_sessions = vec![make_session(&root.join("val"), &cfg, 11)];
    cfg
}

#[test]
fn train_sweep_infer_eval() {
    let root = tempfile::tempdir().unwrap();
    let cfg = tiny_setup(root.path());
    let out = root.path().join("run");
    let mut seen = Vec::new();
    let outcome = run_train(&cfg, &out, |r| seen.push(r.epoch)).unwrap();
    assert_eq!(seen, vec![1, 2]);
    assert_eq!(outcome.store.len(), 2);
    let echoed = fs::read_to_string(out.join(RUN_CONFIG_FILE)).unwrap();
    assert_eq!(RunConfig::from_layers(Some(&echoed), []).unwrap(), cfg);

    let sweep = run_sweep(&cfg, &out).unwrap();
    assert_eq!(sweep.truth.len(), 3600);
    let table = fs::read_to_string(out.join(SWEEP_FILE)).unwrap();
    assert_eq!(table.lines().count(), 1 + 99 * 2);
    let tau100 = (sweep.selection.threshold * 100.0).round();
    assert!((sweep.selection.threshold - tau100 / 100.0).abs() < 1e-12);
    let best = sweep.sweeps.iter().flatten().map(|x| x.1).fold(f64::MIN, f64::max);
    assert_eq!(sweep.selection.f1_macro, best);

    let (sel, ckpt) = load_selection(&out.join(SELECTION_FILE)).unwrap();
    assert_eq!(sel.epoch, ckpt.epoch);
    assert_eq!(sel.checkpoint, train::checkpoint_file_name(sel.epoch));
    let val = load_session(&cfg.val_sessions[0], &cfg, false).unwrap();
    let trace = infer_session(&ckpt, &cfg, &val, None).unwrap();
    assert_eq!(trace.len(), 3600);
    assert!(trace.values.iter().all(|v| (0.0..=1.0).contains(v)));
    let r250 = infer_session(&ckpt, &cfg, &val, Some(250.0)).unwrap();
    assert_eq!(r250.len(), 8999);
    let raw = load_recording(cfg.val_sessions[0].join(RECORDING_FILE)).unwrap();
    assert_eq!(output_len(&raw, 100.0, 100.0), trace.len());
    assert_eq!(output_len(&raw, 100.0, 250.0), r250.len());

    let pred = eval::apply_threshold(&trace, sel.threshold);
    let report = evaluate(
        &pred,
        &val.truth().unwrap(),
        Some(sel.threshold),
        Some(sel.checkpoint.clone()),
    )
    .unwrap();
    assert_eq!(report.f1_macro, sweep.selection.f1_macro);
}

#[test]
fn reruns_are_byte_identical() {
    let runs: Vec<(String, String, String)> = (0..2)
        .map(|_| {
            let root = tempfile::tempdir().unwrap();
            let cfg = tiny_setup(root.path());
            let out = root.path().join("run");
            run_train(&cfg, &out, |_| {}).unwrap();
            run_sweep(&cfg, &out).unwrap();
            let read = |f: &str| fs::read_to_string(out.join(f)).unwrap();
            (
                read(train::STORE_FILE),
                read(train::LOSS_LOG_FILE),
                read(SELECTION_FILE),
            )
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn channel_count_must_match() {
    let root = tempfile::tempdir().unwrap();
    let mut cfg = tiny_setup(root.path());
    cfg.model.c_in = 5;
    assert!(matches!(
        load_session(&cfg.train_sessions[0], &cfg, true),
        Err(Error::Config(_))
    ));
}

#[test]
fn missing_inputs() {
    let root = tempfile::tempdir().unwrap();
    let cfg = tiny_setup(root.path());
    let empty = root.path().join("empty");
    fs::create_dir_all(&empty).unwrap();
    fs::write(empty.join(train::STORE_FILE), "").unwrap();
    assert!(matches!(run_sweep(&cfg, &empty), Err(Error::Config(_))));
    assert!(matches!(run_sweep(&cfg, &root.path().join("nope")), Err(Error::Io(_))));
    let (rec, ev) = generate_session(&cfg.synth).unwrap();
    assert!(matches!(
        write_session(&root.path().join("absent"), &rec, &ev),
        Err(Error::Io(_))
    ));
    let no_train = RunConfig {
        train_sessions: vec![],
        ..cfg
    };
    assert!(matches!(
        run_train(&no_train, &root.path().join("x"), |_| {}),
        Err(Error::Config(_))
    ));
}

#[test]
fn summary_and_info() {
    let cfg = RunConfig::from_layers(Some(TINY), []).unwrap();
    let (rec, ev) = generate_session(&cfg.synth).unwrap();
    let s = session_summary(&rec, &ev);
    assert!(s.starts_with("frames=7200\nchannels=4\n"));
    let info = info_text(&cfg);
    assert!(info.starts_with(&format!("count_params = {}\n", count_params(&cfg.model))));
    assert!(info.contains("epochs = 2\n"));
}
