use std::path::Path;
use std::process::{Command, Output};

fn uos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uos"))
        .args(args)
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_on_a_clean_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = tmp.path().join("ds");
    let out = uos(&[
        "generate",
        "--out",
        path(&ds),
        "--n",
        "20",
        "--per-subspace",
        "15",
        "--mode",
        "unit-sphere",
        "--p",
        "0.9",
        "--seed",
        "4",
    ]);
    assert!(out.status.success());
    for f in ["values.csv", "mask.csv", "meta.json", "truth.csv"] {
        assert!(ds.join(f).exists(), "{f}");
    }

    let labels = tmp.path().join("labels.csv");
    let out = uos(&[
        "cluster",
        path(&ds),
        "--out",
        path(&labels),
        "--coeffs",
        path(&tmp.path().join("coef")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("clustering error 0.000000"));
    let text = std::fs::read_to_string(&labels).unwrap();
    assert_eq!(text.lines().next(), Some("point,label"));
    assert_eq!(text.lines().count(), 46);
    assert!(tmp.path().join("coef").join("coeffs.csv").exists());

    let rec = tmp.path().join("rec");
    let out = uos(&[
        "complete",
        path(&ds),
        "--labels",
        path(&labels),
        "--out",
        path(&rec),
        "--max-iter",
        "2000",
    ]);
    assert!(matches!(out.status.code(), Some(0 | 2)));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let err: f64 = stdout
        .trim()
        .strip_prefix("completion error ")
        .unwrap()
        .parse()
        .unwrap();
    assert!(err < 0.05, "{err}");
    let mask = std::fs::read_to_string(rec.join("mask.csv")).unwrap();
    assert!(!mask.contains('0'));

    let cert = tmp.path().join("cert");
    let out = uos(&["certify", path(&ds), "--out", path(&cert), "--case", "3"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = std::fs::read_to_string(cert.join("certificates.jsonl")).unwrap();
    assert_eq!(report.lines().count(), 45);
    let c: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(cert.join("contingency.json")).unwrap())
            .unwrap();
    assert_eq!(c["certified_incorrect"], 0);
}

#[test]
fn certify_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"n": 12, "points_per_subspace": 8, "p": 1.0}"#).unwrap();
    let out = uos(&[
        "certify",
        "--config",
        path(&cfg),
        "--case",
        "1",
        "--out",
        path(&tmp.path().join("o")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let c: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(c["certified_incorrect"], 0);
    assert!(c["certified_correct"].as_u64().unwrap() > 0);
}

#[test]
fn sweep_writes_the_results_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sweep.json");
    std::fs::write(&cfg, r#"{"n": 16, "points_per_subspace": 8, "p_grid": [0.7, 1.0], "trials": 2, "run_completion": false}"#).unwrap();
    let dir = tmp.path().join("out");
    let out = uos(&["sweep", path(&cfg), "--out", path(&dir)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("case,p,trial,algorithm,clustering_error,completion_error,subspace_error_max_rad,status,seed"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 3);
    assert!(dir.join("thresholds.json").exists());
}

#[test]
fn bad_input_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"trials": 0}"#).unwrap();
    assert_eq!(uos(&["sweep", path(&cfg)]).status.code(), Some(1));
    std::fs::write(&cfg, r#"{"unknown": 1}"#).unwrap();
    assert_eq!(uos(&["sweep", path(&cfg)]).status.code(), Some(1));
    assert_eq!(
        uos(&[
            "cluster",
            path(&tmp.path().join("missing")),
            "--out",
            "x.csv"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        uos(&[
            "generate",
            "--out",
            path(&tmp.path().join("g")),
            "--case",
            "7"
        ])
        .status
        .code(),
        Some(1)
    );
}
