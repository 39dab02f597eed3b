use std::path::Path;
use std::process::{Command, Output};

fn ideq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ideq"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = ideq(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generates instances and a tiny checkpoint.
fn setup(dir: &Path, n: &str) -> (String, String) {
    let data = dir.join("data");
    let ck = dir.join("toy.ckpt");
    ok(&["gen", "--n", n, "--count", "3", "--seed", "10", "--out", s(&data)]);
    ok(&[
        "train", "--n", n, "--count", "8", "--epochs", "1", "--horizon", "50",
        "--inference-steps", "4", "--hidden", "8", "--out", s(&ck),
    ]);
    (s(&data).to_string(), s(&ck).to_string())
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(ideq(&["solve", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(ideq(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(ideq(&["gen", "--n", "ten", "--out", "x"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let out = ideq(&["exact", "--in", "/nonexistent/file.tsp"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn gen_and_exact_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    ok(&["gen", "--n", "7", "--count", "2", "--seed", "4", "--out", s(&data)]);
    assert!(data.join("rand7-4.tsp").exists() && data.join("rand7-5.tsp").exists());
    let hk = ok(&["exact", "--in", s(&data)]);
    let bf = ok(&["exact", "--in", s(&data), "--method", "brute-force"]);
    let lines: Vec<&str> = hk.lines().collect();
    assert_eq!(lines[0], "instance,n,method,length,ref_length,gap_pct,seconds,seed");
    assert_eq!(lines.len(), 3);
    for (a, b) in hk.lines().zip(bf.lines()).skip(1) {
        let fa: Vec<&str> = a.split(',').collect();
        let fb: Vec<&str> = b.split(',').collect();
        assert_eq!(fa[2], "held-karp");
        assert_eq!(fb[2], "brute-force");
        let (la, lb): (f64, f64) = (fa[3].parse().unwrap(), fb[3].parse().unwrap());
        assert!((la - lb).abs() < 1e-9);
        assert_eq!(fa[5], "0");
    }
}

#[test]
fn seconds_column_only_with_timings() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ck) = setup(dir.path(), "8");
    let plain = ok(&["solve", "--in", &data, "--checkpoint", &ck]);
    for line in plain.lines().skip(1) {
        assert_eq!(line.split(',').nth(6), Some(""), "{line}");
    }
    let timed = ok(&["solve", "--in", &data, "--checkpoint", &ck, "--timings"]);
    for line in timed.lines().skip(1) {
        let secs: f64 = line.split(',').nth(6).unwrap().parse().unwrap();
        assert!(secs >= 0.0);
    }
}

#[test]
fn config_file_sets_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ck) = setup(dir.path(), "8");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# solver settings\nseed = 9\nsamples = 2\n").unwrap();
    let from_file = ok(&["solve", "--config", s(&cfg), "--in", &data, "--checkpoint", &ck]);
    let explicit = ok(&["solve", "--in", &data, "--checkpoint", &ck, "--seed", "9", "--samples", "2"]);
    assert_eq!(from_file, explicit);
    assert!(from_file.lines().skip(1).all(|l| l.ends_with(",9")));
    let overridden = ok(&["solve", "--config", s(&cfg), "--in", &data, "--checkpoint", &ck, "--seed", "3"]);
    assert!(overridden.lines().skip(1).all(|l| l.ends_with(",3")));
}

#[test]
fn bench_reference_file_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ck) = setup(dir.path(), "8");
    let refs = dir.path().join("refs.csv");
    std::fs::write(&refs, "name,ref_length\nrand8-10,1.0\n").unwrap();
    let summary = dir.path().join("summary.json");
    let variance = dir.path().join("variance.json");
    let csv = ok(&[
        "bench", "--in", &data, "--checkpoint", &ck, "--modes", "ideq,decode-only",
        "--repetitions", "2", "--reference", s(&refs), "--summary", s(&summary),
        "--variance", s(&variance),
    ]);
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    // 3 instances x (baseline + 2 modes) x 2 repetitions.
    assert_eq!(rows.len(), 18);
    let methods: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[2]).collect();
    assert_eq!(
        methods.into_iter().collect::<Vec<_>>(),
        ["toy+decode-only", "toy+ideq", "two-opt-random"]
    );
    for r in &rows {
        if r[0] == "rand8-10" {
            assert_eq!(r[4], "1");
        }
    }
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(&summary).unwrap()).unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 3);
    let variance: serde_json::Value = serde_json::from_slice(&std::fs::read(&variance).unwrap()).unwrap();
    assert_eq!(variance["entries"].as_array().unwrap().len(), 9);
}

#[test]
fn ablate_and_variance_commands() {
    let dir = tempfile::tempdir().unwrap();
    let (data, ck) = setup(dir.path(), "8");
    let csv = ok(&["ablate", "--in", &data, "--dirac", &ck, "--equivalence", &ck]);
    assert_eq!(csv.lines().count(), 1 + 3 * 6);
    assert!(csv.contains("equiv+t2tco") && csv.contains("dirac+difusco"));

    let hist = dir.path().join("hist.csv");
    let report = dir.path().join("var.json");
    ok(&[
        "variance", "--in", &data, "--checkpoint", &ck, "--repetitions", "4", "--baseline",
        "--bins", "5", "--histogram", s(&hist), "--report", s(&report),
    ]);
    let text = std::fs::read_to_string(&hist).unwrap();
    let mut total = 0;
    for line in text.lines().skip(1) {
        total += line.rsplit(',').next().unwrap().parse::<usize>().unwrap();
    }
    assert_eq!(total, 2 * 3 * 4);
    assert_eq!(text.lines().count(), 1 + 2 * 5);
}

#[test]
fn fine_tune_needs_matching_architecture() {
    let dir = tempfile::tempdir().unwrap();
    let (_, ck) = setup(dir.path(), "8");
    let out = dir.path().join("ft.ckpt");
    let args = [
        "train", "--n", "8", "--count", "8", "--epochs", "1", "--horizon", "50",
        "--inference-steps", "4", "--mode", "equivalence", "--init", &ck, "--out",
    ];
    let mismatched = ideq(&[&args[..], &[s(&out), "--hidden", "16"]].concat());
    assert_eq!(mismatched.status.code(), Some(1));
    ok(&[&args[..], &[s(&out), "--hidden", "8"]].concat());
    assert!(out.exists());
}
