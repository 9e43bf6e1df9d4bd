use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn suphist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_suphist")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = suphist(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_run_eval() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("z.txt");
    ok(&["synth", "--kind", "zipf", "--n", "2048", "--length", "5000", "--scatter", "--seed", "4", "--out", p(&stream)]);
    let run = dir.path().join("run.json");
    ok(&["run", p(&stream), "--algo", "onepass", "--k", "3", "--eps", "0.5", "--seed", "2", "--out", p(&run)]);
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&run).unwrap()).unwrap();
    for key in ["algorithm", "config", "seed", "histogram", "space", "errors"] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["algorithm"], "onepass");
    assert_eq!(report["config"]["k"], 3);
    let eval: Value = serde_json::from_str(&ok(&["eval", p(&stream), "--histogram", p(&run)])).unwrap();
    assert_eq!(eval["support_error"], report["errors"]["support"]);
    assert_eq!(eval["domain_error"], report["errors"]["domain"]);
    // same inputs, same output
    let again = dir.path().join("again.json");
    ok(&["run", p(&stream), "--algo", "onepass", "--k", "3", "--eps", "0.5", "--seed", "2", "--out", p(&again)]);
    assert_eq!(std::fs::read(&run).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn eval_zero_and_oracle_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("s.txt");
    std::fs::write(&stream, "n=20\n3\n3\n7\n12,4\n").unwrap();
    let zero = dir.path().join("zero.json");
    std::fs::write(&zero, r#"{"n":20,"breakpoints":[],"values":[0.0]}"#).unwrap();
    let eval: Value = serde_json::from_str(&ok(&["eval", p(&stream), "--histogram", p(&zero)])).unwrap();
    assert_eq!(eval["support_error"], 1.0);

    let oracle = ok(&["run", p(&stream), "--algo", "oracle", "--k", "3"]);
    let file = dir.path().join("oracle.json");
    std::fs::write(&file, oracle).unwrap();
    let eval: Value = serde_json::from_str(&ok(&["eval", p(&stream), "--histogram", p(&file)])).unwrap();
    assert_eq!(eval["support_error"], 0.0);

    let other = dir.path().join("other.json");
    std::fs::write(&other, r#"{"n":21,"breakpoints":[],"values":[0.0]}"#).unwrap();
    let out = suphist(&["eval", p(&stream), "--histogram", p(&other)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain mismatch"));
}

#[test]
fn sweep_writes_reproducible_csv() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("u.txt");
    ok(&["synth", "--kind", "uniform-sparse", "--n", "4096", "--support", "300", "--length", "6000", "--out", p(&stream)]);
    let run = |tag: &str| {
        let detail = dir.path().join(format!("d{tag}.csv"));
        let summary = dir.path().join(format!("s{tag}.csv"));
        ok(&[
            "sweep", p(&stream), "--algo", "fixed-support,oracle", "--space", "100,300,1000",
            "--trials", "10", "--k", "5", "--seed", "11", "--out", p(&detail), "--summary", p(&summary),
        ]);
        (std::fs::read_to_string(detail).unwrap(), std::fs::read_to_string(summary).unwrap())
    };
    let (d1, s1) = run("a");
    let (d2, s2) = run("b");
    assert_eq!((&d1, &s1), (&d2, &s2));
    assert_eq!(d1.lines().next().unwrap(), "algorithm,space_budget,trial,seed,space,words,pieces,support_error,domain_error");
    assert_eq!(d1.lines().count(), 61);
    assert_eq!(s1.lines().count(), 7);
    let help = ok(&["sweep", "--help"]);
    assert!(help.contains("mean_support_error,std_support_error"));
}

#[test]
fn ingest_modes() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("ips.csv");
    std::fs::write(&raw, "x,10.0.0.1\ny,10.0.0.200\nz,192.168.1.1\n").unwrap();
    let out = dir.path().join("ips.txt");
    ok(&["ingest", p(&raw), "--mode", "ipv4-prefix", "--column", "1", "--out", p(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], format!("n={}", 1u64 << 24));
    assert_eq!(lines[1], (10 * 65536 + 1).to_string());
    assert_eq!(lines[1], lines[2]);

    let raw = dir.path().join("lat.txt");
    std::fs::write(&raw, "40.714\n-90\n").unwrap();
    let text = ok(&["ingest", p(&raw), "--mode", "decimal-bucket", "--step", "0.01", "--min", "-90", "--max", "90"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "13072");
    assert_eq!(lines[2], "1");
}

#[test]
fn gadget_synthesis() {
    let text = ok(&["synth", "--gadget", "proper", "--n", "64", "--a", "10110100", "--j", "5"]);
    assert!(text.starts_with("n=192\n"));
    let out = suphist(&["synth", "--gadget", "proper", "--n", "60", "--a", "1", "--j", "1"]);
    assert!(!out.status.success());
}
