use std::path::Path;
use std::process::{Command, Output};

fn mfjq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfjq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn mfjq_threads(threads: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfjq"))
        .env("MFJQ_THREADS", threads)
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn controlled_run_writes_outputs_and_passes_audits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = mfjq(&["run", "--scenario", "hk_ctrl_h05", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("trajectory.csv").is_file());
    assert!(out.join("meta.json").is_file());
    assert!(out.join("snapshots/step_0000000.csv").is_file());
    assert!(out.join("snapshots/step_0010000.csv").is_file());

    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 42);
    assert_eq!(meta["scenario"]["controller"]["h"], 0.5);
    assert!(meta["version"].as_str().unwrap().starts_with(env!("CARGO_PKG_VERSION")));

    for suite in ["constraints", "conservation"] {
        let o = mfjq(&["verify", suite, "--run-dir", path(&out)]);
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert_eq!(o.status.code(), Some(0), "{stdout}");
        assert!(!stdout.contains("FAIL"));
    }
}

#[test]
fn unknown_scenario_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfjq(&["run", "--scenario", "nope", "--out", path(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope"));
}

#[test]
fn invalid_overrides_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    assert_eq!(mfjq(&["run", "--scenario", "hk_ctrl_h05", "--h", "1.5", "--out", out]).status.code(), Some(2));
    assert_eq!(mfjq(&["run", "--scenario", "hk_free", "--h", "0.5", "--out", out]).status.code(), Some(2));
    assert_eq!(mfjq(&["run", "--scenario", "hk_free", "--dt", "-1", "--out", out]).status.code(), Some(2));
    assert_eq!(mfjq(&["run", "--scenario", "hk_free", "--backend", "mesh", "--out", out]).status.code(), Some(2));
}

#[test]
fn unknown_suite_exits_2() {
    assert_eq!(mfjq(&["verify", "bogus"]).status.code(), Some(2));
}

#[test]
fn repeated_runs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let run = |threads: &str, out: &Path| {
        mfjq_threads(threads, &["run", "--scenario", "hk_free", "--seed", "42", "--out", path(out)])
    };
    assert_eq!(run("1", &a).status.code(), Some(0));
    assert_eq!(run("4", &b).status.code(), Some(0));
    let ta = std::fs::read(a.join("trajectory.csv")).unwrap();
    let tb = std::fs::read(b.join("trajectory.csv")).unwrap();
    assert!(ta == tb, "trajectory.csv differs between runs");
}

#[test]
fn meta_json_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = mfjq(&["run", "--scenario", "concentration", "--c", "0.4", "--out", path(&first)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(first.join("meta.json")).unwrap()).unwrap();
    let config = dir.path().join("resolved.json");
    std::fs::write(&config, serde_json::to_string(&meta["scenario"]).unwrap()).unwrap();
    let second = dir.path().join("second");
    let o = mfjq(&["run", "--config", path(&config), "--out", path(&second)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read(first.join("trajectory.csv")).unwrap(),
        std::fs::read(second.join("trajectory.csv")).unwrap()
    );
}

#[test]
fn escaping_support_exits_3_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec: serde_json::Value =
        serde_json::from_str(include_str!("../../core/scenarios/hk_ctrl_h05.json")).unwrap();
    // Target the left domain edge: the controller pushes mass through the closed boundary.
    spec["name"] = "edge".into();
    spec["initial"] = serde_json::json!({"type": "uniform", "lo": 0.0, "hi": 2.0});
    spec["functional"] = serde_json::json!({"type": "variance0"});
    spec["solver"]["t_end"] = 5.0.into();
    let config = dir.path().join("edge.json");
    std::fs::write(&config, spec.to_string()).unwrap();
    let out = dir.path().join("out");
    let o = mfjq(&["run", "--config", path(&config), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("violations.txt"));
    let report = std::fs::read_to_string(out.join("violations.txt")).unwrap();
    assert!(report.contains("support left"));
}

#[test]
fn verify_oracle_and_dissipativity_pass() {
    for suite in ["oracle", "dissipativity"] {
        let o = mfjq(&["verify", suite]);
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert_eq!(o.status.code(), Some(0), "{stdout}");
        assert!(stdout.contains("PASS"));
    }
    let stdout = String::from_utf8_lossy(&mfjq(&["verify", "oracle"]).stdout).into_owned();
    assert!(stdout.contains("lie_fd_oracle") && stdout.contains("100 cases"));
}

#[test]
fn verify_all_aggregates_every_suite() {
    let o = mfjq(&["verify", "all"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    for suite in ["[constraints]", "[conservation]", "[oracle]", "[dissipativity]"] {
        assert!(stdout.contains(suite), "{suite} missing");
    }
}

#[test]
fn run_dir_is_ignored_by_suites_without_log_audits() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfjq(&["verify", "oracle", "--run-dir", path(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
}
