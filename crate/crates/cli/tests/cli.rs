use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tabvec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tabvec"))
        .args(args)
        .env_remove("TABVEC_API_KEY")
        .output()
        .expect("binary runs")
}

fn write_table(dir: &Path) -> String {
    let mut s = String::from("x,name,when,y\n");
    let mut state = 7u64;
    for i in 0..210 {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let v = (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
        let name: String = (0..8).map(|k| (b'a' + ((state >> (k * 5)) % 26) as u8) as char).collect();
        s.push_str(&format!("{v:.5},{name},2023-01-{:02},{}\n", i % 28 + 1, (v > 0.0) as u8));
    }
    let path = dir.join("t.csv");
    std::fs::write(&path, s).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn profile_lists_string_columns() {
    let dir = tempfile::tempdir().unwrap();
    let t = write_table(dir.path());
    let v = stdout_json(&tabvec(&["profile", "--input", &t, "--seed", "0"]));
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 1);
    assert_eq!(arr[0]["column"], "name");
    assert_eq!(arr[0]["sample_size"], 210);
}

#[test]
fn analyze_reports_seven_folds() {
    let dir = tempfile::tempdir().unwrap();
    let t = write_table(dir.path());
    let out = tabvec(&[
        "analyze", "--input", &t, "--target", "y", "--encoder", "auto", "--train-size", "1000", "--folds", "7",
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["fold_scores"].as_array().unwrap().len(), 7);
    assert!(v["mean"].as_f64().unwrap() > 0.8);
    assert!(String::from_utf8_lossy(&out.stderr).contains("clamped"));
}

#[test]
fn usage_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let t = write_table(dir.path());
    let missing_target = tabvec(&["analyze", "--input", &t]);
    assert_eq!(missing_target.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing_target.stderr).contains("--target"));
    assert_eq!(tabvec(&["profile", "--input", &t, "--bogus"]).status.code(), Some(1));
    assert_eq!(tabvec(&["--help"]).status.code(), Some(0));

    let bad_config = dir.path().join("c.json");
    std::fs::write(&bad_config, "{\"schema_version\": 9}").unwrap();
    let out = tabvec(&["profile", "--input", &t, "--config", bad_config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(tabvec(&["profile", "--input", "/nonexistent.csv"]).status.code(), Some(2));
}

#[test]
fn vectorize_writes_matrix_and_state() {
    let dir = tempfile::tempdir().unwrap();
    let t = write_table(dir.path());
    let out = dir.path().join("m.csv");
    let state = dir.path().join("s.json");
    let o = tabvec(&[
        "vectorize", "--input", &t, "--drop", "y", "--encoder", "minhash",
        "--out", out.to_str().unwrap(), "--state-out", state.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    // 1 numeric + 5 datetime parts + 30 MinHash components.
    assert_eq!(header.len(), 36);
    assert_eq!(text.lines().count(), 211);
    let s: Value = serde_json::from_str(&std::fs::read_to_string(state).unwrap()).unwrap();
    assert_eq!(s["kind"], "vectorizer");
}

#[test]
fn join_sweep_with_gold() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("l.csv"), "city\nlondon\nparis\nberlin\n").unwrap();
    std::fs::write(d.join("r.csv"), "name\nlondn\npariss\ntokyo\nberlin\n").unwrap();
    std::fs::write(d.join("g.csv"), "right_id,left_id\n0,0\n1,1\n2,\n3,2\n").unwrap();
    let p = |f: &str| d.join(f).to_str().unwrap().to_string();
    let v = stdout_json(&tabvec(&[
        "join", "--left", &p("l.csv"), "--right", &p("r.csv"), "--left-key", "city", "--right-key", "name",
        "--encoder", "minhash", "--sweep", "--gold", &p("g.csv"), "--plot-out", &p("curve.csv"),
    ]));
    assert_eq!(v["matches"].as_array().unwrap().len(), 4);
    assert_eq!(v["sweep"]["curve"].as_array().unwrap().len(), 7);
    let curve = std::fs::read_to_string(d.join("curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 8);
    // --sweep without --gold is a usage error.
    let o = tabvec(&[
        "join", "--left", &p("l.csv"), "--right", &p("r.csv"), "--left-key", "city", "--right-key", "name", "--sweep",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_is_reproducible_and_cached() {
    let dir = tempfile::tempdir().unwrap();
    write_table(dir.path());
    let config = r#"{
        "schema_version": 1,
        "task": "analytics",
        "pipeline": {"train_sizes": [140], "pca_dim": 5, "learner": {"n_trees": 10},
                     "backend": {"kind": "mock", "dim": 16, "cache_path": "cache.jsonl"}},
        "datasets": [{"name": "t", "path": "t.csv", "target": "y"}],
        "methods": ["minhash", "embedding"]
    }"#;
    let cfg = dir.path().join("bench.json");
    std::fs::write(&cfg, config).unwrap();
    let run = |out: &str| {
        let out = dir.path().join(out);
        let o = tabvec(&["bench", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(out).unwrap(), String::from_utf8_lossy(&o.stderr).to_string())
    };
    let (a, _) = run("a.json");
    let (b, log) = run("b.json");
    assert_eq!(a, b);
    assert!(log.contains("embedding backend: 0 calls"), "{log}");
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["config_digest"].as_str().unwrap().len(), 64);
}
