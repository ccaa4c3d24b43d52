//! The observed solve matrix: binary outcomes over (solver, problem) pairs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{ArenaError, Result};
use crate::types::{ModelId, Problem, ProblemId, SolveRecord};

/// Sparse binary outcomes defined exactly on the observed pairs.
///
/// Every problem also remembers its author so that self-authored pairs can
/// be refused at insertion time.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OutcomeMatrix {
    entries: BTreeMap<(ModelId, ProblemId), bool>,
    authors: BTreeMap<ProblemId, ModelId>,
}

impl OutcomeMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, solver: ModelId, problem: ProblemId, author: ModelId, outcome: bool) -> Result<()> {
        if solver == author {
            return Err(ArenaError::Integrity(format!(
                "{solver} cannot be scored on its own problem {problem}"
            )));
        }
        match self.authors.get(&problem) {
            Some(known) if *known != author => {
                return Err(ArenaError::Integrity(format!(
                    "problem {problem} attributed to both {known} and {author}"
                )));
            }
            Some(_) => {}
            None => {
                self.authors.insert(problem.clone(), author);
            }
        }
        let key = (solver, problem);
        if self.entries.contains_key(&key) {
            return Err(ArenaError::Integrity(format!(
                "duplicate outcome for solver {} on problem {}",
                key.0, key.1
            )));
        }
        self.entries.insert(key, outcome);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, solver: &ModelId, problem: &ProblemId) -> Option<bool> {
        self.entries.get(&(solver.clone(), problem.clone())).copied()
    }

    /// Entries in (solver, problem) order.
    pub fn iter(&self) -> impl Iterator<Item = (&ModelId, &ProblemId, bool)> {
        self.entries.iter().map(|((m, p), y)| (m, p, *y))
    }

    pub fn solvers(&self) -> BTreeSet<&ModelId> {
        self.entries.keys().map(|(m, _)| m).collect()
    }

    pub fn problems(&self) -> impl Iterator<Item = &ProblemId> {
        self.authors.keys()
    }

    pub fn author_of(&self, problem: &ProblemId) -> Option<&ModelId> {
        self.authors.get(problem)
    }
}

/// Assembles the outcome set from solve records, keeping only valid problems
/// and pairs whose solver is not the author.
pub fn build_outcome_matrix(records: &[SolveRecord], problems: &[Problem]) -> Result<OutcomeMatrix> {
    let by_id: HashMap<&ProblemId, &Problem> = problems.iter().map(|p| (&p.id, p)).collect();
    let mut matrix = OutcomeMatrix::new();
    let mut seen = BTreeSet::new();
    let mut self_authored = 0usize;
    for r in records {
        let problem = by_id.get(&r.problem).ok_or_else(|| {
            ArenaError::Integrity(format!("record references unknown problem {}", r.problem))
        })?;
        if !seen.insert((&r.solver, &r.problem)) {
            return Err(ArenaError::Integrity(format!(
                "duplicate outcome for solver {} on problem {}",
                r.solver, r.problem
            )));
        }
        if r.solver == problem.author {
            self_authored += 1;
            continue;
        }
        if !problem.is_valid() {
            continue;
        }
        matrix.insert(r.solver.clone(), r.problem.clone(), problem.author.clone(), r.outcome)?;
    }
    if self_authored > 0 {
        tracing::warn!(count = self_authored, "dropped self-authored solve records");
    }
    Ok(matrix)
}
