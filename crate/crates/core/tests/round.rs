use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use arena_core::agents::{AgentError, AgentHandle, FnAgent, Task};
use arena_core::manifest::Binding;
use arena_core::store::{StoreError, PROBLEMS, RECORDS, REPORT};
use arena_core::{
    rank, simulate, Arena, ArenaError, EndpointBinding, ErrorClass, Phase, RunManifest, RunStore,
};

fn manifest() -> RunManifest {
    let mut m = RunManifest::synthetic(&[-0.3, -0.1, 0.1, 0.3], 10, 0.8, 11);
    m.bootstrap_iterations = 40;
    m
}

fn bytes(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap()
}

/// The manifest's agents, with a shared counter of solve requests and an
/// optional transport failure on one solver's `fail_at`-th attempt.
fn counted(m: &RunManifest, solves: &Arc<AtomicUsize>, fail_at: Option<usize>) -> Vec<AgentHandle> {
    m.build_agents()
        .unwrap()
        .into_iter()
        .map(|inner| {
            let solves = Arc::clone(solves);
            let own = AtomicUsize::new(0);
            let flaky = fail_at.filter(|_| inner.name().as_str() == "m01");
            let name = inner.name().clone();
            Arc::new(FnAgent::new(name, move |req| {
                if matches!(req.task, Task::Solve { .. }) {
                    solves.fetch_add(1, Ordering::SeqCst);
                    if Some(own.fetch_add(1, Ordering::SeqCst)) == flaky {
                        return Err(AgentError::Transport {
                            attempts: 1,
                            message: "connection reset".into(),
                        });
                    }
                }
                inner.respond(req)
            })) as AgentHandle
        })
        .collect()
}

#[test]
fn interrupted_solve_resumes_to_the_same_artifacts() {
    let m = manifest();
    let clean = tempfile::tempdir().unwrap();
    simulate(&m, clean.path()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let first = Arc::new(AtomicUsize::new(0));
    let arena = Arena::with_agents(RunStore::create(dir.path(), &m).unwrap(), counted(&m, &first, Some(7))).unwrap();
    arena.generate().unwrap();
    let err = arena.solve().unwrap_err();
    assert!(matches!(err, ArenaError::PhaseFailed { phase: Phase::Solve, .. }), "{err}");
    assert_eq!(err.class(), ErrorClass::PhaseFailure);
    let partial = arena.store().checkpoint_path(RECORDS);
    assert!(partial.exists());
    assert!(!dir.path().join(RECORDS).exists());

    let second = Arc::new(AtomicUsize::new(0));
    let resumed = Arena::with_agents(RunStore::open(dir.path()).unwrap(), counted(&m, &second, None)).unwrap();
    resumed.run().unwrap();
    let total = 40 * 3;
    let checkpointed = first.load(Ordering::SeqCst) - 1;
    assert_eq!(second.load(Ordering::SeqCst), total - checkpointed);
    assert!(!partial.exists());
    for name in [PROBLEMS, RECORDS, REPORT] {
        assert_eq!(bytes(dir.path(), name), bytes(clean.path(), name), "{name} differs");
    }
}

#[test]
fn torn_checkpoint_line_is_dropped_and_regenerated() {
    let m = manifest();
    let clean = tempfile::tempdir().unwrap();
    simulate(&m, clean.path()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::create(dir.path(), &m).unwrap();
    let finished = fs::read_to_string(clean.path().join(PROBLEMS)).unwrap();
    let mut lines: Vec<&str> = finished.lines().collect();
    lines.truncate(4);
    let torn = &lines[3][..lines[3].len() / 2];
    let text = format!("{}\n{}\n{}\n{torn}", lines[0], lines[1], lines[2]);
    fs::write(store.checkpoint_path(PROBLEMS), text).unwrap();
    Arena::new(store).unwrap().run().unwrap();
    assert_eq!(bytes(dir.path(), PROBLEMS), bytes(clean.path(), PROBLEMS));
    assert_eq!(bytes(dir.path(), REPORT), bytes(clean.path(), REPORT));
}

#[test]
fn rerank_with_new_bootstrap_settings_keeps_the_run() {
    let m = manifest();
    let dir = tempfile::tempdir().unwrap();
    let first = simulate(&m, dir.path()).unwrap();
    let mut changed = m.clone();
    changed.bootstrap_iterations = 60;
    changed.alpha = 0.05;
    let store = RunStore::open(dir.path()).unwrap().with_manifest(changed).unwrap();
    let second = rank(&store).unwrap();
    assert_eq!(second.run_hash, first.run_hash);
    assert_eq!(second.bootstrap.iterations, 60);
    assert_eq!(second.ratings, first.ratings);
    assert_ne!(second.intervals, first.intervals);

    let mut other = m;
    other.seed += 1;
    let err = RunStore::create(dir.path(), &other).unwrap_err();
    assert!(matches!(err, StoreError::HashMismatch { .. }), "{err}");
}

#[test]
fn parallelism_does_not_change_the_report() {
    let m = manifest();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    simulate(&m, a.path()).unwrap();
    let mut wide = m;
    wide.parallelism = 3;
    simulate(&wide, b.path()).unwrap();
    assert_eq!(bytes(a.path(), REPORT), bytes(b.path(), REPORT));
}

fn endpoint_manifest(url: &str, env: &str) -> RunManifest {
    let mut m = manifest();
    for spec in &mut m.models {
        spec.binding = Binding::Endpoint(EndpointBinding {
            model_name: "remote".into(),
            base_url: url.into(),
            auth_env: env.into(),
            temperature: None,
            max_retries: Some(1),
            timeout_secs: Some(2),
            backoff_ms: Some(1),
        });
    }
    m
}

#[test]
fn unreachable_endpoint_fails_generation_with_a_checkpoint() {
    std::env::set_var("ARENA_ROUND_TEST_KEY", "k");
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let m = endpoint_manifest(&format!("http://127.0.0.1:{port}/v1/chat/completions"), "ARENA_ROUND_TEST_KEY");
    let dir = tempfile::tempdir().unwrap();
    let arena = Arena::new(RunStore::create(dir.path(), &m).unwrap()).unwrap();
    let err = arena.run().unwrap_err();
    match &err {
        ArenaError::PhaseFailed { phase, checkpoint, .. } => {
            assert_eq!(*phase, Phase::Generate);
            assert_eq!(checkpoint, &arena.store().checkpoint_path(PROBLEMS));
        }
        other => panic!("unexpected {other}"),
    }
    assert_eq!(err.class(), ErrorClass::PhaseFailure);
}

#[test]
fn missing_key_is_a_configuration_error() {
    let m = endpoint_manifest("http://127.0.0.1:9/v1/chat/completions", "ARENA_ROUND_TEST_KEY_UNSET");
    let dir = tempfile::tempdir().unwrap();
    let err = Arena::new(RunStore::create(dir.path(), &m).unwrap()).unwrap().run().unwrap_err();
    assert_eq!(err.class(), ErrorClass::Config, "{err}");
}

#[test]
fn simulate_rejects_endpoint_models() {
    let m = endpoint_manifest("http://127.0.0.1:9/v1/chat/completions", "X");
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(simulate(&m, dir.path()), Err(ArenaError::Config(_))));
}
