use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lrising(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrising")).args(args).output().expect("run lrising")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

fn jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let h = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (h, rows)
}

#[test]
fn geometry_small_lines() {
    let d = tempfile::tempdir().unwrap();
    let input = d.path().join("s.txt");
    std::fs::write(&input, "+++++\n++-++\n").unwrap();
    let o = lrising(&["geometry", "--input", input.to_str().unwrap(), "--out", &out_arg(d.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let recs = jsonl(&d.path().join("geometry.jsonl"));
    assert!(recs[0].get("header").is_some());
    assert_eq!(recs[1]["triangles"].as_array().unwrap().len(), 0);
    let t = recs[2]["triangles"].as_array().unwrap();
    assert_eq!(t.len(), 1);
    assert_eq!(t[0]["mass"], 1);
}

#[test]
fn geometry_random_corpus_passes_invariants() {
    let d = tempfile::tempdir().unwrap();
    let input = d.path().join("s.txt");
    // deterministic pseudo-random lines of varying odd length
    let mut x: u64 = 0x9e3779b97f4a7c15;
    let mut text = String::new();
    for k in 0..1000 {
        let n = 2 * (k % 40) + 1;
        for _ in 0..n {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            text.push(if x & 1 == 0 { '+' } else { '-' });
        }
        text.push('\n');
    }
    std::fs::write(&input, text).unwrap();
    let o = lrising(&["geometry", "--input", input.to_str().unwrap(), "--out", &out_arg(d.path())]);
    assert_eq!(code(&o), 0);
    let recs = jsonl(&d.path().join("geometry.jsonl"));
    assert_eq!(recs.len(), 1001);
    assert!(recs[1..].iter().all(|r| r["invariants_ok"] == true));
}

#[test]
fn geometry_malformed_line_reports_line_number() {
    let d = tempfile::tempdir().unwrap();
    let input = d.path().join("s.txt");
    std::fs::write(&input, "+++\n+x+\n").unwrap();
    let o = lrising(&["geometry", "--input", input.to_str().unwrap(), "--out", &out_arg(d.path())]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("s.txt:2"));
}

#[test]
fn check_bijection_l7() {
    let d = tempfile::tempdir().unwrap();
    let o = lrising(&["check", "bijection", "--L", "7", "--out", &out_arg(d.path())]);
    assert_eq!(code(&o), 0);
    let rep: Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("check_bijection.json")).unwrap()).unwrap();
    assert_eq!(rep["pass"], true);
    assert_eq!(rep["instances"], 2 * (1 << 15));
    let (h, rows) = csv_rows(&d.path().join("check_bijection.csv"));
    assert_eq!(h, ["group", "instance", "lhs", "relation", "rhs", "holds"]);
    assert_eq!(rows.len(), 2 * (1 << 15));
}

#[test]
fn check_peierls_reports_minimal_j() {
    let d = tempfile::tempdir().unwrap();
    let o = lrising(&[
        "check",
        "peierls",
        "--L",
        "6",
        "--bigJ",
        "10",
        "--alpha",
        "0.3",
        "--set",
        "samples=200",
        "--set",
        "mass_max=4",
        "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(code(&o), 0);
    let rep: Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("check_peierls.json")).unwrap()).unwrap();
    let j = rep["details"]["min_j"].as_u64().unwrap();
    assert!((1..=10).contains(&j));
}

#[test]
fn check_entropy_l10() {
    let d = tempfile::tempdir().unwrap();
    let o = lrising(&["check", "entropy", "--L", "10", "--gamma", "0.25", "--out", &out_arg(d.path())]);
    assert_eq!(code(&o), 0);
    let (_, rows) = csv_rows(&d.path().join("check_entropy.csv"));
    assert_eq!(rows.len(), 22);
}

#[test]
fn failing_check_exits_one() {
    // the leading-order two-point centers are far off at this volume
    let d = tempfile::tempdir().unwrap();
    let o = lrising(&[
        "check",
        "cluster",
        "--L",
        "8",
        "--beta",
        "1.2",
        "--bigJ",
        "5",
        "--a",
        "0.1",
        "--gamma",
        "0.6",
        "--nu",
        "0.05",
        "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_errors_exit_two() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&lrising(&["check", "nosuch"])), 2);
    assert_eq!(code(&lrising(&["enumerate", "--set", "nokey=1", "--out", &out_arg(d.path())])), 2);
    let o = lrising(&["enumerate", "--alpha", "0.9", "--beta", "-1", "--m", "3", "--out", &out_arg(d.path())]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    for k in ["alpha", "beta", "m:"] {
        assert!(err.contains(k), "{err}");
    }
}

#[test]
fn enumerate_events_csv() {
    let d = tempfile::tempdir().unwrap();
    let o = lrising(&[
        "enumerate",
        "--L",
        "5",
        "--beta",
        "1",
        "--events",
        "all,window(m=0,eps0=0.2)",
        "--out",
        &out_arg(d.path()),
    ]);
    assert_eq!(code(&o), 0);
    let (h, rows) = csv_rows(&d.path().join("enumerate.csv"));
    assert_eq!(h, ["event", "count", "probability", "log_z", "mean_m"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][1], "2048");
    let log_z: f64 = rows[0][3].parse().unwrap();
    assert!(log_z > 0.0);
    let (_, sites) = csv_rows(&d.path().join("enumerate_sites.csv"));
    assert_eq!(sites.len(), 22);
}

#[test]
fn cluster_envelope_csv() {
    let d = tempfile::tempdir().unwrap();
    let o = lrising(&["cluster", "--L", "8", "--beta", "1.2", "--bigJ", "5", "--out", &out_arg(d.path())]);
    assert_eq!(code(&o), 0);
    let (h, rows) = csv_rows(&d.path().join("cluster.csv"));
    assert_eq!(h, ["quantity", "i", "j", "exact", "center", "half_width", "lo", "hi", "contained"]);
    assert_eq!(rows[0][0], "log_z");
    assert!(rows.iter().all(|r| r[8] == "true" || r[8] == "false"));
}

#[test]
fn sample_stream_is_reproducible_from_its_config() {
    let d = tempfile::tempdir().unwrap();
    let out = out_arg(d.path());
    let o = lrising(&[
        "sample",
        "--L",
        "16",
        "--m",
        "0",
        "--m-beta",
        "0.98",
        "--sweeps",
        "50",
        "--burn-in",
        "20",
        "--replicas",
        "2",
        "--seed",
        "5",
        "--out",
        &out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let recs = jsonl(&d.path().join("sample.jsonl"));
    assert_eq!(recs[0]["header"]["config"]["seed"], "5");
    assert_eq!(recs.len(), 2 + 2 * 50);
    assert!(recs[2].get("is_b").is_some() && recs[2]["chain"] == 0 && recs[2]["sweep"] == 1);
    let first: Vec<Vec<u8>> = ["run.cfg", "sample.jsonl", "sample_summary.csv"]
        .iter()
        .map(|f| std::fs::read(d.path().join(f)).unwrap())
        .collect();
    let cfg = d.path().join("saved.cfg");
    std::fs::copy(d.path().join("run.cfg"), &cfg).unwrap();
    let o = lrising(&["sample", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for (k, f) in ["run.cfg", "sample.jsonl", "sample_summary.csv"].iter().enumerate() {
        assert_eq!(std::fs::read(d.path().join(f)).unwrap(), first[k], "{f} differs");
    }
}

#[test]
fn flags_override_config_file() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("a.cfg");
    std::fs::write(&cfg, "# comment\nalpha = 0.2\nL = 3\nevents = all\n").unwrap();
    let o = lrising(&["enumerate", "--config", cfg.to_str().unwrap(), "--L", "2", "--out", &out_arg(d.path())]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(d.path().join("run.cfg")).unwrap();
    assert!(text.contains("alpha = 0.2\n") && text.contains("L = 2\n"));
}
