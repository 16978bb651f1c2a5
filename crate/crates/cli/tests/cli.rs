use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bws_core::imaging::load_image;

fn bws(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bws")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = bws(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth_images(dir: &Path, n: usize) -> PathBuf {
    let n = n.to_string();
    ok(&["synth", "--out", s(dir), "--mode", "images", "--n-pos", &n, "--n-neg", &n, "--image-size", "96"]);
    dir.join("manifest.csv")
}

fn synth_vectors(dir: &Path) -> PathBuf {
    ok(&["synth", "--out", s(dir), "--n-pos", "15", "--n-neg", "15"]);
    dir.join("manifest.csv")
}

#[test]
fn help_and_version_exit_zero() {
    assert!(ok(&["--help"]).contains("extract"));
    assert!(ok(&["--version"]).starts_with("bws"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&bws(&[])), 1);
    assert_eq!(code(&bws(&["frobnicate"])), 1);
    assert_eq!(code(&bws(&["eval", "--format", "xml", "--manifest", "m.csv"])), 1);
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[train]\nlamda = 2.0\n").unwrap();
    let out = bws(&["--config", s(&cfg), "synth", "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("lamda"));
}

#[test]
fn missing_manifest_is_a_data_error() {
    let out = bws(&["eval", "--manifest", "/nonexistent/manifest.csv"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn extract_writes_bags_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_images(&dir.path().join("data"), 2);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["extract", "--manifest", s(&manifest), "--out", s(&a)]);
    ok(&["extract", "--manifest", s(&manifest), "--out", s(&b)]);
    for name in ["img0000.json", "img0003.json", "manifest.csv", "extract_log.json"] {
        let (x, y) = (std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap());
        assert_eq!(x, y, "{name}");
    }
    let bag: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("img0000.json")).unwrap()).unwrap();
    assert_eq!(bag["D"], 200);
    assert_eq!(bag["m"].as_u64().unwrap() as usize, bag["instances"].as_array().unwrap().len());

    // Training on the extracted bags matches training on the images directly.
    let from_bags = dir.path().join("bags_model.json");
    let from_images = dir.path().join("images_model.json");
    ok(&["train", "--manifest", s(&a.join("manifest.csv")), "--model-out", s(&from_bags)]);
    ok(&["train", "--manifest", s(&manifest), "--model-out", s(&from_images)]);
    let weights = |p: &Path| -> serde_json::Value {
        serde_json::from_slice::<serde_json::Value>(&std::fs::read(p).unwrap()).unwrap()["weights"].clone()
    };
    assert_eq!(weights(&from_bags), weights(&from_images));
}

#[test]
fn extract_lists_unreadable_images_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let manifest = synth_images(&data, 1);
    std::fs::write(data.join("broken.png"), b"not a png").unwrap();
    let mut text = std::fs::read_to_string(&manifest).unwrap();
    text += "broken,broken.png,-1\n";
    std::fs::write(&manifest, text).unwrap();
    let out_dir = dir.path().join("bags");
    let out = bws(&["extract", "--manifest", s(&manifest), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(out_dir.join("img0000.json").exists());
    assert!(out_dir.join("img0001.json").exists());
    assert!(!out_dir.join("broken.json").exists());
    let log: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("extract_log.json")).unwrap()).unwrap();
    assert_eq!(log["failed"], 1);
    assert_eq!(log["extracted"], 2);
    let broken = log["entries"].as_array().unwrap().iter().find(|e| e["id"] == "broken").unwrap();
    assert!(broken["error"].is_string());
}

#[test]
fn train_writes_model_and_monotone_trace() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_vectors(&data);
    let model = dir.path().join("model.json");
    let trace = dir.path().join("trace.csv");
    let bags: Vec<String> = (0..30).map(|j| s(&data.join(format!("bags/bag{j:04}.json"))).to_string()).collect();
    let mut args = vec!["train", "--model-out", s(&model), "--trace", s(&trace), "--format", "json", "--bags"];
    args.extend(bags.iter().map(String::as_str));
    let summary: serde_json::Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(summary["training_errors"], 0);
    assert_eq!(summary["bags"], 30);

    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("outer_iter,objective,inner_iters,training_errors"));
    let objectives: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(objectives.len() >= 2);
    assert!(objectives.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{objectives:?}");

    let model_json: serde_json::Value = serde_json::from_slice(&std::fs::read(&model).unwrap()).unwrap();
    assert_eq!(model_json["feature_fingerprint"], "synthetic-vector");
    assert!(model_json["config"]["train"].is_object());

    let pred: serde_json::Value =
        serde_json::from_str(&ok(&["predict", "--model", s(&model), "--bag", &bags[0], "--format", "json"])).unwrap();
    assert_eq!(pred["label"], 1);
}

#[test]
fn train_rejects_single_class_and_unlabelled_bags() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth_vectors(&data);
    let model = dir.path().join("model.json");
    let positives: Vec<String> = (0..5).map(|j| s(&data.join(format!("bags/bag{j:04}.json"))).to_string()).collect();
    let mut args = vec!["train", "--model-out", s(&model), "--bags"];
    args.extend(positives.iter().map(String::as_str));
    let out = bws(&args);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains('5'));

    let path = data.join("bags/bag0000.json");
    let mut bag: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    bag["label"] = serde_json::Value::Null;
    let unlabelled = dir.path().join("unlabelled.json");
    std::fs::write(&unlabelled, bag.to_string()).unwrap();
    let out = bws(&["train", "--model-out", s(&model), "--bags", s(&unlabelled), s(&data.join("bags/bag0029.json"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no label"));
}

#[test]
fn predict_refuses_foreign_fingerprint_and_writes_overlay() {
    let dir = tempfile::tempdir().unwrap();
    let vectors = dir.path().join("vectors");
    synth_vectors(&vectors);
    let images = synth_images(&dir.path().join("images"), 3);
    let foreign = dir.path().join("foreign.json");
    ok(&["train", "--manifest", s(&vectors.join("manifest.csv")), "--model-out", s(&foreign)]);
    let image = dir.path().join("images/images/img0000.png");
    let out = bws(&["predict", "--model", s(&foreign), "--image", s(&image)]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("synthetic-vector") && err.contains("fc-"), "{err}");

    let model = dir.path().join("model.json");
    ok(&["train", "--manifest", s(&images), "--model-out", s(&model)]);
    let overlay = dir.path().join("overlay.png");
    let text = ok(&["predict", "--model", s(&model), "--image", s(&image), "--overlay", s(&overlay)]);
    assert!(text.starts_with("img0000: +1"), "{text}");
    let tinted = load_image(&overlay).unwrap();
    assert_eq!((tinted.width, tinted.height), (96, 96));
}

#[test]
fn baseline_and_eval_reports() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_images(&dir.path().join("data"), 3);
    let table = ok(&["baseline", "--method", "celebi", "--manifest", s(&manifest)]);
    let header: Vec<&str> = table.lines().next().unwrap().split('|').map(str::trim).collect();
    assert_eq!(header, ["Dataset", "Method", "Accuracy", "Precision", "Recall", "f-score", "Specificity"]);

    let out = bws(&["baseline", "--method", "palette", "--manifest", s(&manifest)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("palette"));

    let palette = dir.path().join("data/palette.json");
    let report = dir.path().join("palette_report.json");
    ok(&["baseline", "--method", "palette", "--manifest", s(&manifest), "--palette", s(&palette), "--report", s(&report)]);
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(r["method"], "palette");
    assert_eq!(r["n"], 6);
    assert!(r["config"].is_object());

    // Six images cannot fill ten folds.
    let out = bws(&["eval", "--manifest", s(&manifest), "--folds", "10"]);
    assert_ne!(code(&out), 0);

    let cross = dir.path().join("cross.json");
    ok(&[
        "eval", "--train-manifest", s(&manifest), "--test-manifest", s(&manifest), "--report", s(&cross),
    ]);
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&cross).unwrap()).unwrap();
    assert_eq!(r["n"], 6);
}

#[test]
fn threads_flag_gives_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_images(&dir.path().join("data"), 2);
    let one = ok(&["eval", "--manifest", s(&manifest), "--folds", "2", "--threads", "1", "--format", "json"]);
    let many = ok(&["eval", "--manifest", s(&manifest), "--folds", "2", "--threads", "4", "--format", "json"]);
    assert_eq!(one, many);
}
