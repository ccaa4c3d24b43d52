//! Fixtures shared by the benchmarks.

use arena_core::round::verified_state;
use arena_core::store::{PROBLEMS, RECORDS, VERDICTS};
use arena_core::verifier::Verdict;
use arena_core::{build_outcome_matrix, simulate, OutcomeMatrix, Problem, RunManifest, RunStore, SolveRecord};

/// Inputs of the ranking phase for one simulated round.
pub struct Ranked {
    pub manifest: RunManifest,
    pub problems: Vec<Problem>,
    pub outcomes: OutcomeMatrix,
}

/// Simulates a round of `agents` synthetic models with abilities evenly
/// spaced on [-2, 2], each authoring `per_author` problems.
pub fn ranked_round(agents: usize, per_author: usize, seed: u64) -> Ranked {
    let abilities: Vec<f64> = (0..agents)
        .map(|i| -2.0 + 4.0 * i as f64 / (agents - 1) as f64)
        .collect();
    let mut manifest = RunManifest::synthetic(&abilities, per_author, 1.0, seed);
    manifest.bootstrap_iterations = 20;
    let dir = tempfile::tempdir().expect("temporary directory");
    simulate(&manifest, dir.path()).expect("simulated round");
    let store = RunStore::open(dir.path()).expect("run directory");
    let problems: Vec<Problem> = store.read_jsonl(PROBLEMS, "problems").expect("problems");
    let records: Vec<SolveRecord> = store.read_jsonl(RECORDS, "records").expect("records");
    let verdicts: Vec<Verdict> = store.read_jsonl(VERDICTS, "verdicts").expect("verdicts");
    let (problems, records) = verified_state(&problems, &records, &verdicts).expect("verified state");
    let outcomes = build_outcome_matrix(&records, &problems).expect("outcome matrix");
    Ranked {
        manifest,
        problems,
        outcomes,
    }
}

/// Answer/gold pairs that exercise each canonicalization path.
pub const ANSWERS: &[(&str, &str)] = &[
    ("42", "42"),
    (r"\frac{3}{4}", "0.75"),
    (r"\sqrt{8}", r"2\sqrt{2}"),
    (r"\binom{10}{3}", "120"),
    ("2^{10} - 24", "1000"),
    (r"\boxed{\frac{\pi}{6}}", r"\frac{2\pi}{12}"),
    ("1.5e-3", r"\frac{3}{2000}"),
    (r"\left(1 + \frac{1}{2}\right)^{3}", r"\frac{27}{8}"),
];
