//! Verification: a backbone model judges well-posedness and picks the
//! correct answer among the author's gold and the distinct solver answers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentError, Request, Task};
use crate::answer::{canonicalize_str, judge_against, CanonicalForm};
use crate::prompts::{field, render, Templates};
use crate::types::{ModelId, Problem, ProblemId, SolveRecord, Validity};

/// Escalated verification draws this many verdicts in total.
pub const ESCALATED_SAMPLES: usize = 3;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("problem {problem}: verdict from {backbone} unreadable after one re-ask: {reason}")]
    Unparseable {
        problem: ProblemId,
        backbone: ModelId,
        reason: String,
    },
    #[error("problem {problem}: {source}")]
    Agent {
        problem: ProblemId,
        #[source]
        source: AgentError,
    },
    #[error("verdict for {verdict} applied to problem {problem}")]
    ForeignVerdict { problem: ProblemId, verdict: ProblemId },
    #[error("verdict lists cover different problems: {0}")]
    Mismatch(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub answer: String,
    /// Reasoning of the first solver that gave this answer; empty for the gold.
    pub trace: String,
    pub is_gold: bool,
    /// Solvers whose answer is equivalent to this one.
    pub supporters: usize,
}

/// The gold plus every distinct evaluable solver answer, deduplicated by
/// equivalence. The gold is always first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub problem: ProblemId,
    pub candidates: Vec<Candidate>,
    /// Number of solver records the set was built from.
    pub solvers: usize,
}

impl CandidateSet {
    pub fn build(problem: &Problem, records: &[&SolveRecord]) -> Self {
        let mut forms: Vec<Option<CanonicalForm>> = vec![canonicalize_str(&problem.gold).ok()];
        let mut candidates = vec![Candidate {
            answer: problem.gold.clone(),
            trace: String::new(),
            is_gold: true,
            supporters: 0,
        }];
        for r in records.iter().filter(|r| r.problem == problem.id) {
            let Ok(form) = canonicalize_str(&r.answer) else { continue };
            let same = forms
                .iter()
                .position(|f| f.as_ref().is_some_and(|f| f.equivalent_to(&form)));
            match same {
                Some(i) => candidates[i].supporters += 1,
                None => {
                    forms.push(Some(form));
                    candidates.push(Candidate {
                        answer: r.answer.clone(),
                        trace: r.trace.clone(),
                        is_gold: false,
                        supporters: 1,
                    });
                }
            }
        }
        CandidateSet {
            problem: problem.id.clone(),
            candidates,
            solvers: records.iter().filter(|r| r.problem == problem.id).count(),
        }
    }

    /// Index of the candidate equivalent to `answer`, if any.
    pub fn find(&self, answer: &str) -> Option<usize> {
        let form = canonicalize_str(answer).ok()?;
        self.candidates.iter().position(|c| {
            canonicalize_str(&c.answer)
                .map(|f| f.equivalent_to(&form))
                .unwrap_or(false)
        })
    }

    /// Candidate list as shown to the backbone: answers and reasoning only.
    fn render(&self) -> String {
        self.candidates
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let origin = if c.is_gold { "author's answer" } else { "solver answer" };
                let trace = if c.trace.trim().is_empty() { "(none given)" } else { c.trace.trim() };
                format!("CANDIDATE {} ({origin}): {}\nREASONING:\n{trace}\n", i + 1, c.answer)
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// True iff some solver answered incorrectly.
pub fn needs_verification(problem: &Problem, records: &[&SolveRecord]) -> bool {
    records.iter().any(|r| r.problem == problem.id && !r.outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub problem: ProblemId,
    pub backbone: ModelId,
    #[serde(with = "crate::types::binary")]
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<String>,
    pub rationale: String,
    pub samples: usize,
    /// The backbone authored the problem it judged.
    #[serde(default)]
    pub conflict: bool,
}

#[derive(Clone, Debug, PartialEq)]
struct Ballot {
    valid: bool,
    choice: Option<usize>,
    rationale: String,
}

fn parse_ballot(text: &str, set: &CandidateSet) -> Result<Ballot, String> {
    let mut valid = None;
    let mut answer = None;
    let mut rationale = Vec::new();
    let mut in_rationale = false;
    for line in text.lines() {
        if let Some(v) = field(line, "VALID") {
            valid = Some(v.to_ascii_lowercase());
            in_rationale = false;
        } else if let Some(a) = field(line, "ANSWER") {
            answer = Some(a.to_string());
            in_rationale = false;
        } else if let Some(r) = field(line, "RATIONALE") {
            rationale.push(r);
            in_rationale = true;
        } else if in_rationale {
            rationale.push(line);
        }
    }
    let valid = match valid.as_deref().map(|v| v.trim_end_matches('.')) {
        Some("yes" | "true" | "1") => true,
        Some("no" | "false" | "0") => false,
        Some(other) => return Err(format!("VALID field {other:?} is neither yes nor no")),
        None => return Err("no VALID field".into()),
    };
    let rationale = rationale.join("\n").trim().to_string();
    if !valid {
        return Ok(Ballot {
            valid,
            choice: None,
            rationale,
        });
    }
    let answer = answer.ok_or("valid verdict without ANSWER field")?;
    let index = answer.trim_start_matches('#').trim_end_matches('.');
    let choice = match index.parse::<usize>() {
        Ok(i) if (1..=set.candidates.len()).contains(&i) => i - 1,
        // A free-form answer must coincide with a listed candidate.
        _ => set
            .find(&answer)
            .ok_or_else(|| format!("ANSWER {answer:?} matches no candidate"))?,
    };
    Ok(Ballot {
        valid,
        choice: Some(choice),
        rationale,
    })
}

fn ballot(
    problem: &Problem,
    set: &CandidateSet,
    backbone: &dyn Agent,
    sample: usize,
    templates: &Templates,
) -> Result<Ballot, VerifyError> {
    let base = render(
        &templates.verify,
        &[("statement", &problem.statement), ("candidates", &set.render())],
    );
    let mut reason = String::new();
    for attempt in 0..2u32 {
        let prompt = if attempt == 0 {
            base.clone()
        } else {
            format!("{base}{}", templates.format_reminder)
        };
        let task = Task::Verify {
            problem: problem.id.clone(),
            statement: problem.statement.clone(),
            gold: problem.gold.clone(),
            candidates: set.candidates.iter().map(|c| c.answer.clone()).collect(),
            sample,
        };
        let reply = backbone
            .respond(&Request { prompt, task, attempt })
            .map_err(|source| VerifyError::Agent {
                problem: problem.id.clone(),
                source,
            })?;
        match parse_ballot(&reply.text, set) {
            Ok(b) => return Ok(b),
            Err(why) => {
                tracing::warn!(problem = %problem.id, backbone = %backbone.name(), attempt, reason = %why, "unreadable verdict");
                reason = why;
            }
        }
    }
    Err(VerifyError::Unparseable {
        problem: problem.id.clone(),
        backbone: backbone.name().clone(),
        reason,
    })
}

/// Validity by majority (ties go to the first ballot), then the most voted
/// candidate among valid ballots (ties to more supporters, then lower index).
fn plurality(ballots: &[Ballot], set: &CandidateSet) -> (bool, Option<usize>, String) {
    let yes = ballots.iter().filter(|b| b.valid).count();
    let no = ballots.len() - yes;
    let valid = if yes == no { ballots[0].valid } else { yes > no };
    if !valid {
        let first = ballots.iter().find(|b| !b.valid).expect("an invalid ballot");
        return (false, None, first.rationale.clone());
    }
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for c in ballots.iter().filter_map(|b| b.choice) {
        *votes.entry(c).or_default() += 1;
    }
    let (&choice, _) = votes
        .iter()
        .max_by(|a, b| {
            a.1.cmp(b.1)
                .then(set.candidates[*a.0].supporters.cmp(&set.candidates[*b.0].supporters))
                .then(b.0.cmp(a.0))
        })
        .expect("a valid ballot");
    let rationale = ballots
        .iter()
        .find(|b| b.choice == Some(choice))
        .map(|b| b.rationale.clone())
        .unwrap_or_default();
    (true, Some(choice), rationale)
}

/// Draws `samples` verdicts and takes the plurality. With a single sample
/// that selects an answer held by a strict minority of solvers, two more
/// are drawn.
pub fn verify(
    problem: &Problem,
    set: &CandidateSet,
    backbone: &dyn Agent,
    samples: usize,
    templates: &Templates,
) -> Result<Verdict, VerifyError> {
    let samples = samples.max(1);
    let mut ballots = (0..samples)
        .map(|i| ballot(problem, set, backbone, i, templates))
        .collect::<Result<Vec<_>, _>>()?;
    if samples == 1 {
        if let Some(c) = ballots[0].choice {
            if 2 * set.candidates[c].supporters < set.solvers {
                tracing::info!(problem = %problem.id, "minority answer selected, escalating verification");
                for i in 1..ESCALATED_SAMPLES {
                    ballots.push(ballot(problem, set, backbone, i, templates)?);
                }
            }
        }
    }
    let (valid, choice, rationale) = plurality(&ballots, set);
    let conflict = backbone.name() == &problem.author;
    if conflict {
        tracing::warn!(problem = %problem.id, backbone = %backbone.name(), "backbone judged its own problem");
    }
    Ok(Verdict {
        problem: problem.id.clone(),
        backbone: backbone.name().clone(),
        valid,
        selected: choice.map(|c| set.candidates[c].answer.clone()),
        rationale,
        samples: ballots.len(),
        conflict,
    })
}

/// Excludes, confirms or overrides. An override re-judges every record of
/// the problem against the new gold. Applying a verdict twice is the same
/// as applying it once.
pub fn apply_verdict(problem: &mut Problem, verdict: &Verdict, records: &mut [SolveRecord]) -> Result<(), VerifyError> {
    if verdict.problem != problem.id {
        return Err(VerifyError::ForeignVerdict {
            problem: problem.id.clone(),
            verdict: verdict.problem.clone(),
        });
    }
    if !verdict.valid {
        problem.validity = Validity::Invalid;
        return Ok(());
    }
    problem.validity = Validity::Valid;
    let Some(selected) = &verdict.selected else {
        return Ok(());
    };
    let Ok(new_gold) = canonicalize_str(selected) else {
        return Ok(());
    };
    let same = canonicalize_str(&problem.gold).is_ok_and(|g| g.equivalent_to(&new_gold));
    if same {
        return Ok(());
    }
    problem.gold = selected.clone();
    problem.gold_overridden = true;
    for r in records.iter_mut().filter(|r| r.problem == problem.id) {
        let j = judge_against(&r.answer, &new_gold);
        r.outcome = j.outcome;
        r.flag = j.flag;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub problems: usize,
    pub same_exclusion: usize,
    pub exclusion_agreement: f64,
    pub kept_by_both: usize,
    pub same_answer: usize,
    /// `None` when no problem is kept by both backbones.
    pub answer_agreement: Option<f64>,
    pub exclusion_disagreements: Vec<ProblemId>,
    pub answer_disagreements: Vec<ProblemId>,
}

fn index(verdicts: &[Verdict], label: &str) -> Result<BTreeMap<ProblemId, Verdict>, VerifyError> {
    let mut map = BTreeMap::new();
    for v in verdicts {
        if map.insert(v.problem.clone(), v.clone()).is_some() {
            return Err(VerifyError::Mismatch(format!("{label} has two verdicts for {}", v.problem)));
        }
    }
    Ok(map)
}

/// Agreement between two backbones over the same problems.
pub fn compare_backbones(a: &[Verdict], b: &[Verdict]) -> Result<AgreementReport, VerifyError> {
    let (a, b) = (index(a, "first list")?, index(b, "second list")?);
    let ka: BTreeSet<&ProblemId> = a.keys().collect();
    let kb: BTreeSet<&ProblemId> = b.keys().collect();
    if ka != kb {
        let only: Vec<String> = ka.symmetric_difference(&kb).take(5).map(|p| p.to_string()).collect();
        return Err(VerifyError::Mismatch(format!("e.g. {}", only.join(", "))));
    }
    let mut report = AgreementReport {
        problems: a.len(),
        same_exclusion: 0,
        exclusion_agreement: 0.0,
        kept_by_both: 0,
        same_answer: 0,
        answer_agreement: None,
        exclusion_disagreements: Vec::new(),
        answer_disagreements: Vec::new(),
    };
    for (id, va) in &a {
        let vb = &b[id];
        if va.valid != vb.valid {
            report.exclusion_disagreements.push(id.clone());
            continue;
        }
        report.same_exclusion += 1;
        if va.valid {
            report.kept_by_both += 1;
            let same = match (&va.selected, &vb.selected) {
                (Some(x), Some(y)) => match (canonicalize_str(x), canonicalize_str(y)) {
                    (Ok(fx), Ok(fy)) => fx.equivalent_to(&fy),
                    _ => x.trim() == y.trim(),
                },
                (None, None) => true,
                _ => false,
            };
            if same {
                report.same_answer += 1;
            } else {
                report.answer_disagreements.push(id.clone());
            }
        }
    }
    if report.problems > 0 {
        report.exclusion_agreement = report.same_exclusion as f64 / report.problems as f64;
    }
    if report.kept_by_both > 0 {
        report.answer_agreement = Some(report.same_answer as f64 / report.kept_by_both as f64);
    }
    Ok(report)
}
