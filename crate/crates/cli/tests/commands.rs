use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cpdmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpdmd")).args(args).env_remove("CPDMD_SEED").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn simulate_writes_streams_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpdmd(&["simulate", "--scenario", "mean/3", "--seeds", "5", "--output", path(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["tau"], 300);
    let seqs = manifest["sequences"].as_array().unwrap();
    assert_eq!(seqs.len(), 5);
    for s in seqs {
        let text = fs::read_to_string(dir.path().join(s["file"].as_str().unwrap())).unwrap();
        assert_eq!(text.lines().count(), 601);
        assert_eq!(text.lines().next(), Some("x"));
        assert_eq!(s["changepoints"], serde_json::json!([300]));
    }
}

#[test]
fn simulate_is_reproducible_and_seeded_from_env() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert!(cpdmd(&["simulate", "--scenario", "amplitude/2", "--output", path(d.path())]).status.success());
    }
    let out = Command::new(env!("CARGO_BIN_EXE_cpdmd"))
        .args(["simulate", "--scenario", "amplitude/2", "--output", path(c.path())])
        .env("CPDMD_SEED", "9")
        .output()
        .unwrap();
    assert!(out.status.success());
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("amplitude_2_000.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn simulate_rejects_unknown_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpdmd(&["simulate", "--scenario", "mean/99", "--output", path(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_str(stderr(&out).trim()).unwrap();
    let msg = err["error"]["message"].as_str().unwrap();
    assert!(msg.contains("mean/3") && msg.contains("location/1"), "{msg}");
}

#[test]
fn simulate_null_streams() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpdmd(&["simulate", "--scenario", "variance/0.2", "--null", "--length", "100000", "--output", path(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["tau"], Value::Null);
    assert_eq!(manifest["sequences"][0]["changepoints"], serde_json::json!([]));
    let file = manifest["sequences"][0]["file"].as_str().unwrap().to_string();
    assert_eq!(fs::read_to_string(dir.path().join(file)).unwrap().lines().count(), 100_001);
}

#[test]
fn detect_finds_a_location_change() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cpdmd(&["simulate", "--scenario", "location/1", "--output", path(dir.path())]).status.success());
    let input = dir.path().join("location_1_000.csv");
    let report = dir.path().join("report.json");
    let trace = dir.path().join("trace.csv");
    let out = cpdmd(&["detect", "--input", path(&input), "--output", path(&report), "--trace", path(&trace)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let cps = read_json(&report)["changepoints"].as_array().unwrap().clone();
    assert_eq!(cps.len(), 1, "{cps:?}");
    let cp = cps[0].as_u64().unwrap();
    assert!((300..=330).contains(&cp), "{cp}");
    let trace = fs::read_to_string(trace).unwrap();
    assert!(trace.starts_with("t,epsilon,delta,z,mu,sigma_z,alarm\n"));
    // Burn-in alarms are traced but do not latch; the first later one is the changepoint.
    let first_alarm = trace
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(",1"))
        .map(|l| l.split(',').next().unwrap().parse::<u64>().unwrap())
        .find(|&t| t > 100);
    assert_eq!(first_alarm, Some(cp));

    // Deterministic output.
    let again = dir.path().join("again.json");
    assert!(cpdmd(&["detect", "--input", path(&input), "--output", path(&again)]).status.success());
    assert_eq!(fs::read(&report).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn detect_accepts_multivariate_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("abc.csv");
    let mut text = String::from("a,b,c\n");
    for t in 1..=250 {
        let s = (0.3 * t as f64).sin();
        let shift = if t > 150 { 2.0 } else { 0.0 };
        text.push_str(&format!("{s},{},{}\n", (0.2 * t as f64).cos(), s + shift));
    }
    fs::write(&input, text).unwrap();
    let out = cpdmd(&["detect", "--input", path(&input), "--format", "csv", "--jobs", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("changepoint\n"));
}

#[test]
fn detect_reports_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = cpdmd(&["detect", "--input", path(&empty)]);
    assert_eq!(out.status.code(), Some(2));

    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "a,b\n1,2\n3,4\n5\n").unwrap();
    let out = cpdmd(&["detect", "--input", path(&ragged)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));

    let text = dir.path().join("text.csv");
    fs::write(&text, "a\n1\nfoo\n").unwrap();
    let out = cpdmd(&["detect", "--input", path(&text)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));

    let out = cpdmd(&["detect", "--input", path(&dir.path().join("missing.csv"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(cpdmd(&["detect"]).status.code(), Some(1));
    assert_eq!(cpdmd(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    fs::write(&input, "x\n1\n2\n").unwrap();
    assert_eq!(cpdmd(&["detect", "--input", path(&input), "--lambda", "1.5"]).status.code(), Some(1));
    assert_eq!(cpdmd(&["--help"]).status.code(), Some(0));
}

fn write_manifest(dir: &Path, truths: &[(usize, Vec<usize>)]) -> std::path::PathBuf {
    let seqs: Vec<Value> = truths
        .iter()
        .enumerate()
        .map(|(i, (len, cps))| serde_json::json!({ "id": format!("s{i}"), "length": len, "changepoints": cps }))
        .collect();
    let p = dir.join("truth.json");
    fs::write(&p, serde_json::json!({ "sequences": seqs }).to_string()).unwrap();
    p
}

#[test]
fn evaluate_single_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_manifest(dir.path(), &[(600, vec![300])]);
    let det = dir.path().join("det.json");
    fs::write(&det, r#"{"changepoints": [310], "segments": []}"#).unwrap();
    let out = cpdmd(&["evaluate", "--truth", path(&truth), "--input", path(&det), "--margins", "0,30"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let row = stdout(&out).lines().nth(1).unwrap().to_string();
    let f: Vec<&str> = row.split(',').collect();
    assert_eq!(&f[1..4], &["1.000", "1.000", "1.000"]);
}

#[test]
fn evaluate_censored_null_batch() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_manifest(dir.path(), &vec![(100_000, vec![]); 10]);
    let det = dir.path().join("det.json");
    let batch: serde_json::Map<String, Value> = (0..10).map(|i| (format!("s{i}"), serde_json::json!([]))).collect();
    fs::write(&det, Value::Object(batch).to_string()).unwrap();
    let out = cpdmd(&["evaluate", "--truth", path(&truth), "--input", path(&det)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).trim_end().ends_with("99900.00,0.00"), "{}", stdout(&out));
}

#[test]
fn evaluate_rejects_mismatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write_manifest(dir.path(), &[(600, vec![300]), (600, vec![300])]);
    let det = dir.path().join("det.json");
    fs::write(&det, r#"{"s0": [305], "other": [301]}"#).unwrap();
    let out = cpdmd(&["evaluate", "--truth", path(&truth), "--input", path(&det)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("other"));
}

#[test]
fn benchmark_smoke_run() {
    let out = cpdmd(&["benchmark", "--seeds", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert_eq!(header, "scenario,algorithm,params,precision,recall,f1,arl1,sdrl1,arl0,sdrl0");
    let rows: Vec<&str> = lines.collect();
    assert!(rows.iter().all(|r| r.split(',').count() == 10));
    // 7 types plus the aggregate, best and default rows for both algorithms.
    assert_eq!(rows.len(), 8 * 4);
}

#[test]
fn benchmark_single_config() {
    let out = cpdmd(&["benchmark", "--seeds", "2", "--scenario", "mean/4", "--scenario", "location/1", "--lambda", "0.05", "--limit", "4.5", "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let cpdmd_rows: Vec<&Value> = v["rows"].as_array().unwrap().iter().filter(|r| r["algorithm"] == "cpdmd").collect();
    let groups: Vec<&str> = cpdmd_rows.iter().map(|r| r["scenario"].as_str().unwrap()).collect();
    assert_eq!(groups, ["location", "mean", "all"]);
}

#[test]
fn theory_check_default_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = cpdmd(&["theory-check", "--output", path(dir.path())]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("violations=0"));
    let bounds = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert_eq!(bounds.lines().count(), 101);
    assert!(bounds.lines().skip(1).all(|l| l.ends_with(",true")));
    let cx = fs::read_to_string(dir.path().join("complexity.csv")).unwrap();
    for line in cx.lines().skip(1) {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let (p, w, d) = (f[0], f[1], f[2]);
        assert_eq!(f[4], p * d * (w - d) * (p * d).min(w - d));
    }
}

#[test]
fn theory_check_counts_skipped_windows() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("impulses.csv");
    let mut text = String::from("x\n");
    for t in 1..=300 {
        text.push_str(if t % 15 == 0 { "1\n" } else { "0\n" });
    }
    fs::write(&input, text).unwrap();
    let out = cpdmd(&["theory-check", "--input", path(&input), "--no-sweep"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("skipped=100"), "{}", stdout(&out));
}
