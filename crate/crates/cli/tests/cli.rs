use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eepcrawl(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_eepcrawl"));
    cmd.args(args).env("RUST_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_run_analyze_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net");
    let out = eepcrawl(&["simulate", "--out", arg(&net), "--sites", "80", "--seed", "3", "--instances", "2"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["simnet.json", "ground_truth.json", "seeds.txt", "config.toml"] {
        assert!(net.join(f).is_file(), "{f}");
    }

    let config = net.join("config.toml");
    let out = eepcrawl(&["run", "--config", arg(&config), "--horizon-days", "30"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("records: 80"), "{stdout}");
    assert!(stdout.contains("FINISHED"), "{stdout}");
    assert!(net.join("logs/probes-1.jsonl").is_file());

    let report = dir.path().join("report");
    let out = eepcrawl(&["analyze", "--config", arg(&config), "--out", arg(&report)], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(report.join("table2_source_status.csv").is_file());
    assert!(report.join("summary.txt").is_file());

    let graph = dir.path().join("graph");
    let store = net.join("crawl.redb");
    let out = eepcrawl(&["export-graph", "--store", arg(&store), "--out", arg(&graph)], &[]);
    assert!(out.status.success());
    assert_eq!(fs::read(graph.join("graph.graphml")).unwrap(), fs::read(report.join("graph.graphml")).unwrap());
}

#[test]
fn single_instance_flag_runs_only_that_instance() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net");
    assert!(eepcrawl(&["simulate", "--out", arg(&net), "--sites", "40", "--preset", "random"], &[]).status.success());
    let out = eepcrawl(
        &["run", "--config", arg(&net.join("config.toml")), "--instances", "4", "--instance-id", "2"],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(net.join("logs/probes-2.jsonl").is_file());
    assert!(!net.join("logs/probes-0.jsonl").exists());
}

#[test]
fn config_problems_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(eepcrawl(&["run", "--config", arg(&missing)], &[]).status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "max_ongoing_spiders = 0\n").unwrap();
    assert_eq!(eepcrawl(&["run", "--config", arg(&bad)], &[]).status.code(), Some(1));

    fs::write(&bad, "no_such_key = 1\n").unwrap();
    assert_eq!(eepcrawl(&["run", "--config", arg(&bad)], &[]).status.code(), Some(1));

    assert_eq!(eepcrawl(&["run"], &[]).status.code(), Some(1));
    assert_eq!(eepcrawl(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn environment_overrides_are_validated_too() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("net");
    assert!(eepcrawl(&["simulate", "--out", arg(&net), "--sites", "20"], &[]).status.success());
    let out = eepcrawl(
        &["run", "--config", arg(&net.join("config.toml"))],
        &[("EEPCRAWL_HTTP_TIMEOUT", "0")],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn store_problems_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.redb");
    let out = eepcrawl(&["analyze", "--store", arg(&missing), "--out", arg(dir.path())], &[]);
    assert_eq!(out.status.code(), Some(2));

    let garbage = dir.path().join("garbage.redb");
    fs::write(&garbage, b"not a database").unwrap();
    let out = eepcrawl(&["export-graph", "--store", arg(&garbage), "--out", arg(dir.path())], &[]);
    assert_eq!(out.status.code(), Some(2));
}
