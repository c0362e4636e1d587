use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_photonas"));
    c.env_remove("PHOTONAS_DATA_DIR");
    c
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn estimate_hw_reproduces_reference_components() {
    let v = json(&ok(&["estimate-hw", "--modes", "9", "--photons", "5"]));
    assert_eq!(v["components"]["t_prep"], 65.0);
    assert_eq!(v["depth"], 65);
    assert!((v["components"]["t_det"].as_f64().unwrap() - 0.6774).abs() < 2e-4);

    let v = json(&ok(&["estimate-hw", "--modes", "17", "--photons", "9"]));
    assert_eq!(v["components"]["t_prep"], 129.0);
    assert!((v["components"]["t_det"].as_f64().unwrap() - 16.52).abs() < 5e-3);

    let v = json(&ok(&[
        "estimate-hw",
        "--modes",
        "17",
        "--photons",
        "9",
        "--eta",
        "1.0",
    ]));
    assert_eq!(v["components"]["t_det"], 0.0125);
}

#[test]
fn estimate_hw_total_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let v = json(&ok(&[
        "estimate-hw",
        "--modes",
        "9",
        "--photons",
        "5",
        "--classical-ms",
        "0.535",
        "--classical-std-ms",
        "0.65",
        "--out",
        out,
    ]));
    let total = v["total"]["mean"].as_f64().unwrap();
    let quantum = v["estimate"]["quantum"]["mean"].as_f64().unwrap();
    assert!((total - quantum - 0.535).abs() < 1e-12);
    assert!(dir.path().join("timing.json").is_file());
    let m: Value = serde_json::from_str(&read(&dir.path().join("manifest.json"))).unwrap();
    assert!(m["artifacts"]["timing.json"].as_str().unwrap().len() == 64);
    assert_eq!(m["config"]["command"], "estimate-hw");
}

#[test]
fn usage_errors_exit_two() {
    let out = run(&["search", "--pop", "0", "--seed", "1", "--fitness", "mock"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["search", "--fitness", "mock"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    let out = run(&[
        "train",
        "--reference",
        "digits",
        "--seed",
        "1",
        "--data-dir",
        "/nonexistent",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/optdigits.csv"));
    let out = run(&[
        "train",
        "--reference",
        "digits",
        "--seed",
        "1",
        "--dataset",
        "cifar",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["estimate-hw", "--modes", "9"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_data_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("optdigits.csv"), "1,2,3\n").unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&[
        "train",
        "--reference",
        "digits",
        "--seed",
        "1",
        "--data-dir",
        d,
        "--out",
        d,
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn mock_search(out: &Path, extra: &[&str]) -> Output {
    let o = out.to_str().unwrap();
    let mut args = vec![
        "search",
        "--fitness",
        "mock",
        "--pop",
        "8",
        "--gens",
        "6",
        "--seed",
        "7",
        "--out",
        o,
    ];
    args.extend_from_slice(extra);
    ok(&args)
}

#[test]
fn search_is_deterministic_and_resumable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    mock_search(a.path(), &[]);
    for f in [
        "search_log.csv",
        "best_genome.json",
        "search_summary.json",
        "manifest.json",
    ] {
        assert!(a.path().join(f).is_file(), "{f}");
    }
    let log = read(&a.path().join("search_log.csv"));
    assert_eq!(log.lines().count(), 1 + 8 * 6);

    let out = mock_search(b.path(), &["--stop-after", "2"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("stopped"));
    assert!(!b.path().join("search_log.csv").exists());
    let out = mock_search(b.path(), &[]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("resuming after generation 2"));
    assert_eq!(read(&b.path().join("search_log.csv")), log);
    assert_eq!(
        read(&b.path().join("best_genome.json")),
        read(&a.path().join("best_genome.json"))
    );

    let fresh = mock_search(b.path(), &["--fresh"]);
    assert!(!String::from_utf8_lossy(&fresh.stderr).contains("resuming"));
    assert_eq!(read(&b.path().join("search_log.csv")), log);

    // A checkpoint from another configuration is refused.
    let o = b.path().to_str().unwrap();
    let out = run(&[
        "search",
        "--fitness",
        "mock",
        "--pop",
        "8",
        "--gens",
        "6",
        "--seed",
        "8",
        "--out",
        o,
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 7\nout = \"runs\"\n[search]\npopulation = 6\ngenerations = 3\nfitness = \"mock\"\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    ok(&["search", "--config", c, "--gens", "2"]);
    let m: Value = serde_json::from_str(&read(&dir.path().join("runs/manifest.json"))).unwrap();
    assert_eq!(m["config"]["search"]["population"], 6);
    assert_eq!(m["config"]["search"]["generations"], 2);
    assert_eq!(m["config"]["seed"], 7);
    std::fs::write(&cfg, "seed = 7\nbogus = 1\n").unwrap();
    assert_eq!(run(&["search", "--config", c]).status.code(), Some(2));
}

#[test]
fn train_analyze_and_estimate_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = data_dir();
    let d = d.to_str().unwrap();
    let t0 = dir.path().join("t0");
    ok(&[
        "train",
        "--reference",
        "digits",
        "--seed",
        "1",
        "--epochs",
        "0",
        "--data-dir",
        d,
        "--out",
        t0.to_str().unwrap(),
    ]);
    assert!(t0.join("checkpoint.json").is_file());
    assert_eq!(read(&t0.join("history.csv")).lines().count(), 1);

    let t1 = dir.path().join("t1");
    let t1s = t1.to_str().unwrap();
    ok(&[
        "train",
        "--reference",
        "digits",
        "--seed",
        "1",
        "--epochs",
        "1",
        "--data-dir",
        d,
        "--out",
        t1s,
    ]);
    let hist = read(&t1.join("history.csv"));
    assert_eq!(hist.lines().count(), 2);
    assert!(hist.starts_with("epoch,train_loss,val_loss,val_acc"));
    let ckpt = t1.join("checkpoint.json");
    let ck = ckpt.to_str().unwrap();

    let an = dir.path().join("an");
    ok(&[
        "analyze",
        "--checkpoint",
        ck,
        "--data-dir",
        d,
        "--out",
        an.to_str().unwrap(),
    ]);
    let r: Value = serde_json::from_str(&read(&an.join("contribution.json"))).unwrap();
    assert!(r["interclass"]["mean"].is_number() && r["orthogonality"]["mean"].is_number());
    assert_eq!(read(&an.join("cosine_matrix.csv")).lines().count(), 11);

    let v = json(&ok(&["estimate-hw", "--checkpoint", ck]));
    assert_eq!(
        (v["modes"].as_u64(), v["photons"].as_u64()),
        (Some(9), Some(5))
    );
    let v = json(&ok(&[
        "estimate-hw",
        "--checkpoint",
        ck,
        "--measure-classical",
        "--runs",
        "5",
        "--data-dir",
        d,
    ]));
    assert_eq!(v["classical"]["runs"], 5);
    assert!(v["classical"]["median_ms"].as_f64().unwrap() > 0.0);
}

#[test]
fn genome_file_mismatch_names_the_gene() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    let mut genes: serde_json::Map<String, Value> = serde_json::from_value(serde_json::json!({
        "batch_size": 16, "pre_depth": 0, "pre_width": 16, "pre_activation": "silu",
        "pre_bn": false, "pre_dropout": 0.2, "phase_activation": "tanh", "phase_scale_init": 1.5,
        "phase_bias": false, "q_output_size": 16, "clf_depth": 3, "clf_width": 64,
        "clf_activation": "silu", "clf_bn": true, "clf_dropout": 0.0, "lr": 0.008,
        "lr_schedule": "cosine", "weight_decay": 0.0001, "grad_clip": 1.0
    }))
    .unwrap();
    genes.insert("clf_width".into(), serde_json::json!(77));
    std::fs::write(
        &g,
        serde_json::to_string(&serde_json::json!({ "genes": genes })).unwrap(),
    )
    .unwrap();
    let d = data_dir();
    let out = run(&[
        "train",
        "--genome",
        g.to_str().unwrap(),
        "--seed",
        "1",
        "--epochs",
        "0",
        "--data-dir",
        d.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("clf_width"));
}

#[test]
fn baseline_writes_one_history_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = data_dir();
    ok(&[
        "baseline",
        "--reference",
        "digits",
        "--seed",
        "1",
        "--epochs",
        "1",
        "--val-fraction",
        "0.9",
        "--data-dir",
        d.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--workers",
        "2",
    ]);
    let histories = std::fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("history_")
        })
        .count();
    assert_eq!(histories, 6);
    let c: Value = serde_json::from_str(&read(&dir.path().join("comparison.json"))).unwrap();
    assert!(c["delta_pp"]["mean"].is_number() && c["delta_pp"]["std"].is_number());
    assert_eq!(c["seeds"], serde_json::json!([1, 2, 3]));
}

#[test]
fn correlate_epochs_writes_one_row_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let d = data_dir();
    ok(&[
        "correlate-epochs",
        "--seed",
        "2",
        "--n-arch",
        "6",
        "--epochs",
        "8",
        "--proxy-size",
        "100",
        "--input-size",
        "4",
        "--data-dir",
        d.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let csv = read(&dir.path().join("epoch_correlation.csv"));
    assert_eq!(csv.lines().count(), 9);
    assert!(csv.starts_with("epoch,pearson,spearman"));
}
