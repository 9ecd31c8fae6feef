use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gdm_core::datagen::dataset_files;
use gdm_core::gdm::{GdmConfig, GdmModel, Profile};

fn gdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdm"))
        .args(args)
        .env_remove("GDM_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gdm(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn stderr_line(out: &Output) -> String {
    let err = String::from_utf8_lossy(&out.stderr).to_string();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    err.trim_end().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small dataset: 10 categories, 2 instances, 5 frames, dim 16.
fn small_data(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "generate", "--out", s(dir), "--instances", "2", "--frames", "5", "--dim", "16", "--seed", "4",
    ];
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn generate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    small_data(&a, &[]);
    small_data(&b, &[]);
    let files = dataset_files(&a).unwrap();
    assert_eq!(files.len(), 15);
    for f in &files {
        let name = f.file_name().unwrap();
        assert_eq!(fs::read(f).unwrap(), fs::read(b.join(name)).unwrap(), "{name:?}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 15);
}

#[test]
fn usage_errors_are_single_line() {
    let tmp = tempfile::tempdir().unwrap();
    let out = gdm(&["generate", "--out", s(tmp.path()), "--categories", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).starts_with("E_USAGE: "));

    let out = gdm(&["run", "sideways", "--data", "x", "--out", "y"]);
    assert!(!out.status.success());
    assert!(stderr_line(&out).starts_with("E_USAGE: "));

    assert!(gdm(&["--help"]).status.success());
}

#[test]
fn nc_needs_ten_categories() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_data(&data, &["--categories", "8"]);
    let out = gdm(&["run", "nc", "--data", s(&data), "--out", s(&tmp.path().join("run"))]);
    assert_eq!(out.status.code(), Some(1));
    let line = stderr_line(&out);
    assert!(line.starts_with("E_SHAPE: "), "{line}");
    assert!(line.contains("10 categories") && line.contains("4+2+2+2"), "{line}");
}

#[test]
fn runs_are_reproducible_and_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_data(&data, &[]);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "run", "incremental", "--data", s(&data), "--out", s(&out), "--trials", "2", "--no-temporal-context",
        ]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(fs::read(a.join("metrics.jsonl")).unwrap(), fs::read(b.join("metrics.jsonl")).unwrap());
    for t in 0..2 {
        let name = format!("model_trial{t}.gdms");
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }

    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["scenario"]["temporal_context"], false);
    assert_eq!(manifest["config"]["model"]["episodic"]["context_weights"].as_array().unwrap().len(), 1);
    let other: serde_json::Value = serde_json::from_slice(&fs::read(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_digest"], other["config_digest"]);
    assert_eq!(manifest["dataset_digest"], other["dataset_digest"]);
    let outputs: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
    assert!(outputs.contains(&"metrics.jsonl") && outputs.contains(&"model_trial1.gdms"), "{outputs:?}");
}

#[test]
fn inspect_and_project_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let fresh = GdmModel::new(GdmConfig::from_profile(Profile::Batch, false), 2, [&[0.0, 0.0], &[1.0, 1.0]]).unwrap();
    let snap = tmp.path().join("fresh.gdms");
    fs::write(&snap, fresh.to_bytes()).unwrap();
    let text = ok(&["inspect", s(&snap)]);
    assert_eq!(text.matches("neurons: 2, edges: 0").count(), 2, "{text}");
    assert_eq!(ok(&["inspect", s(&snap)]), text);

    let round = GdmModel::from_bytes(&fs::read(&snap).unwrap()).unwrap();
    let again = tmp.path().join("again.gdms");
    fs::write(&again, round.to_bytes()).unwrap();
    assert_eq!(ok(&["inspect", s(&again)]), text);

    let data = tmp.path().join("data");
    small_data(&data, &[]);
    let out = tmp.path().join("run");
    ok(&[
        "run", "batch", "--data", s(&data), "--out", s(&out), "--trials", "1", "--epochs", "4", "--max-edge-age", "5",
    ]);
    let model = out.join("model_trial0.gdms");
    let text = ok(&["inspect", s(&model)]);
    for line in text.lines().filter(|l| l.trim_start().starts_with("edge ages:")) {
        for cell in line.split_whitespace().skip(2) {
            let lo: u32 = cell.trim_start_matches('[').split("..").next().unwrap().parse().unwrap();
            assert!(lo <= 5, "{line}");
        }
    }

    let csv = tmp.path().join("proj/em.csv");
    ok(&["project", s(&model), "--out", s(&csv)]);
    let table = fs::read_to_string(&csv).unwrap();
    let mut rows = table.lines();
    assert_eq!(rows.next(), Some("id,x,y,category,instance,habituation,neighbors"));
    let m = GdmModel::from_bytes(&fs::read(&model).unwrap()).unwrap();
    assert_eq!(rows.count(), m.episodic().len());
    ok(&["project", s(&model), "--out", s(&tmp.path().join("sm.csv")), "--net", "sm"]);
}

#[test]
fn corrupt_snapshot_is_a_parse_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.gdms");
    fs::write(&bad, b"GDMS\x01\x00\x00\x00garbage").unwrap();
    let out = gdm(&["inspect", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).starts_with("E_PARSE: "));
    let out = gdm(&["project", s(&bad), "--out", s(&tmp.path().join("x.csv"))]);
    assert!(stderr_line(&out).starts_with("E_PARSE: "));

    let out = gdm(&["inspect", s(&tmp.path().join("missing.gdms"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_line(&out).starts_with("E_"));
}
