use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use arena_core::manifest::Binding;
use arena_core::{EndpointBinding, RunManifest};

fn arena(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arena"))
        .args(args)
        .env_remove("ARENA_LOG")
        .output()
        .expect("arena binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn simulated(dir: &Path) {
    let out = arena(&["simulate", "--out", dir.to_str().unwrap(), "--agents", "6", "--bootstrap-iterations", "40"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn write_manifest(dir: &Path, m: &RunManifest) -> String {
    let path = dir.join("input.json");
    fs::write(&path, serde_json::to_string_pretty(m).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_then_report_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    simulated(&run);
    let run = run.to_str().unwrap();

    let md = stdout(&arena(&["report", "--out", run]));
    assert!(md.starts_with("| # | Model | Solve | Author | Composite | 95% CI | Range |"), "{md}");
    assert_eq!(md.lines().count(), 2 + 6);

    let out = arena(&["report", "--out", run, "--format", "json"]);
    assert_eq!(code(&out), 0);
    let rows: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 6);
    assert_eq!(rows[0]["rank"], 1);

    let file = dir.path().join("board.json");
    let out = arena(&["report", "--out", run, "--format", "json", "--output", file.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read_to_string(&file).unwrap(), stdout(&arena(&["report", "--out", run, "--format", "json"])));
}

#[test]
fn rank_overrides_leave_the_manifest_alone() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    let run = dir.path().to_str().unwrap();
    let before = fs::read(dir.path().join("manifest.json")).unwrap();
    let out = arena(&["rank", "--out", run, "--bootstrap-iterations", "25", "--alpha", "0.05"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(dir.path().join("manifest.json")).unwrap(), before);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["data"]["bootstrap"]["iterations"], 25);
    assert!(stdout(&arena(&["report", "--out", run])).contains("| 90% CI |"));
}

#[test]
fn phases_run_one_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = RunManifest::synthetic(&[-1.0, -0.3, 0.3, 1.0], 8, 1.0, 3);
    m.bootstrap_iterations = 30;
    let manifest = write_manifest(dir.path(), &m);
    let run = dir.path().join("run");
    let run = run.to_str().unwrap();
    let first = arena(&["generate", "--manifest", &manifest, "--out", run]);
    assert_eq!(stdout(&first).trim(), "32 problems");
    for phase in ["solve", "verify", "rank"] {
        let out = arena(&[phase, "--out", run]);
        assert_eq!(code(&out), 0, "{phase}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = arena(&["replay-verify", "--out", run, "--backbone", "m02"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("exclusion agreement"));
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let run = run.to_str().unwrap();

    let missing = dir.path().join("absent.json");
    assert_eq!(code(&arena(&["generate", "--manifest", missing.to_str().unwrap(), "--out", run])), 2);

    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(code(&arena(&["generate", "--manifest", garbage.to_str().unwrap(), "--out", run])), 2);

    assert_eq!(code(&arena(&["simulate", "--out", run, "--agents", "1"])), 2);

    let mut m = RunManifest::synthetic(&[-0.5, 0.5], 2, 1.0, 0);
    for spec in &mut m.models {
        spec.binding = Binding::Endpoint(EndpointBinding {
            model_name: "remote".into(),
            base_url: "http://127.0.0.1:9/v1/chat/completions".into(),
            auth_env: "ARENA_CLI_TEST_KEY_NEVER_SET".into(),
            temperature: None,
            max_retries: Some(0),
            timeout_secs: Some(1),
            backoff_ms: Some(1),
        });
    }
    let manifest = write_manifest(dir.path(), &m);
    let out = arena(&["generate", "--manifest", &manifest, "--out", run]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ARENA_CLI_TEST_KEY_NEVER_SET"));
}

#[test]
fn foreign_manifest_is_an_integrity_error() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    simulated(&run);
    let mut other = RunManifest::synthetic(&[-0.5, 0.5], 2, 1.0, 99);
    other.bootstrap_iterations = 10;
    let manifest = write_manifest(dir.path(), &other);
    let out = arena(&["report", "--manifest", &manifest, "--out", run.to_str().unwrap()]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
}
