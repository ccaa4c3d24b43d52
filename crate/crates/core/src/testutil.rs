//! Small constructors shared by unit tests.

use crate::genpipe::GenerationTrace;
use crate::outcome::OutcomeMatrix;
use crate::types::{taxonomy, ModelId, Problem, ProblemId, SolveRecord, Validity};

pub fn id(name: &str) -> ModelId {
    ModelId::new(name).expect("non-empty name")
}

/// A valid problem in `author`'s slot `slot` with gold `1`.
pub fn problem(author: &str, slot: usize) -> Problem {
    let statement = format!("Compute `{slot} + 1 - {slot}`.");
    Problem {
        id: ProblemId::for_slot(&id(author), slot),
        author: id(author),
        domain: taxonomy()[slot % 30].clone(),
        provenance: GenerationTrace::direct(statement.clone(), "1"),
        statement,
        gold: "1".into(),
        gold_overridden: false,
        validity: Validity::Valid,
        stages_used: 1,
        latent_difficulty: None,
    }
}

/// A record whose answer is `1` when correct and `0` otherwise.
pub fn record(solver: &str, problem: &str, outcome: bool) -> SolveRecord {
    SolveRecord {
        solver: id(solver),
        problem: ProblemId::new(problem),
        answer: if outcome { "1" } else { "0" }.into(),
        trace: String::new(),
        outcome,
        flag: None,
    }
}

/// Matrix from `(solver, problem, author, outcome)` rows.
pub fn matrix_from(rows: &[(&str, &str, &str, bool)]) -> OutcomeMatrix {
    let mut m = OutcomeMatrix::new();
    for &(s, p, a, y) in rows {
        m.insert(id(s), ProblemId::new(p), id(a), y).expect("consistent fixture");
    }
    m
}
