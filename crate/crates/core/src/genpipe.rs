//! Problem authoring: optional meta-prompt, generation, optional hardening.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, AgentError, Reply, Request, Task};
use crate::answer::canonical_gold;
use crate::prompts::{domain_vars, field, render, Templates};
use crate::types::{DomainTag, ModelId, Problem, ProblemId, Validity};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaPrompt {
    pub author: ModelId,
    pub domain: DomainTag,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub statement: String,
    pub gold: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationTrace {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta_prompt: Option<MetaPrompt>,
    pub draft_statement: String,
    pub draft_gold: String,
    #[serde(default)]
    pub amplification_history: Vec<Variant>,
    pub stages_used: u8,
    /// Hardening rounds whose output was rejected.
    #[serde(default)]
    pub fallbacks: usize,
}

impl GenerationTrace {
    /// Trace of a one-stage item.
    pub fn direct(statement: impl Into<String>, gold: impl Into<String>) -> Self {
        GenerationTrace {
            meta_prompt: None,
            draft_statement: statement.into(),
            draft_gold: gold.into(),
            amplification_history: Vec::new(),
            stages_used: 1,
            fallbacks: 0,
        }
    }

    /// The statement and gold the pipeline finally emitted.
    pub fn final_variant(&self) -> (&str, &str) {
        match self.amplification_history.last() {
            Some(v) => (&v.statement, &v.gold),
            None => (&self.draft_statement, &self.draft_gold),
        }
    }

    pub fn is_consistent(&self) -> bool {
        match self.stages_used {
            1 => self.meta_prompt.is_none() && self.amplification_history.is_empty(),
            2 => self.meta_prompt.is_some() && self.amplification_history.is_empty(),
            3 => self.meta_prompt.is_some(),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum GenerationError {
    #[error("{author} returned an empty meta-prompt for {domain}")]
    EmptyMetaPrompt { author: ModelId, domain: DomainTag },
    #[error("{author} slot {slot}: {reason}")]
    Malformed { author: ModelId, slot: usize, reason: String },
    #[error("{author}: {source}")]
    Agent {
        author: ModelId,
        #[source]
        source: AgentError,
    },
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
}

/// How many stages to run and how many hardening rounds stage 3 applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub stages: u8,
    pub amplification_rounds: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            stages: 3,
            amplification_rounds: 1,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        if !(1..=3).contains(&self.stages) {
            return Err(GenerationError::Config(format!(
                "pipeline_stages must be 1, 2 or 3, got {}",
                self.stages
            )));
        }
        Ok(())
    }
}

/// A statement with its gold and, for synthetic authors, latent difficulty.
#[derive(Clone, Debug, PartialEq)]
pub struct Draft {
    pub statement: String,
    pub gold: String,
    pub latent_difficulty: Option<f64>,
}

fn ask(author: &dyn Agent, prompt: String, task: Task, attempt: u32) -> Result<Reply, GenerationError> {
    author
        .respond(&Request { prompt, task, attempt })
        .map_err(|source| GenerationError::Agent {
            author: author.name().clone(),
            source,
        })
}

pub fn make_meta_prompt(author: &dyn Agent, domain: &DomainTag, templates: &Templates) -> Result<MetaPrompt, GenerationError> {
    let prompt = render(&templates.meta_prompt, &domain_vars(domain));
    for attempt in 0..2 {
        let task = Task::MetaPrompt { domain: domain.clone() };
        let reply = ask(author, prompt.clone(), task, attempt)?;
        if !reply.text.trim().is_empty() {
            return Ok(MetaPrompt {
                author: author.name().clone(),
                domain: domain.clone(),
                text: reply.text,
            });
        }
        tracing::warn!(author = %author.name(), attempt, "empty meta-prompt");
    }
    Err(GenerationError::EmptyMetaPrompt {
        author: author.name().clone(),
        domain: domain.clone(),
    })
}

/// Splits a `STATEMENT: … / ANSWER: …` reply. The statement may span lines;
/// the gold must canonicalize.
pub fn parse_authored(text: &str) -> Result<(String, String), String> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .position(|l| field(l, "STATEMENT").is_some())
        .ok_or("no STATEMENT field")?;
    let end = lines[start..]
        .iter()
        .position(|l| field(l, "ANSWER").is_some())
        .map(|i| start + i)
        .ok_or("no ANSWER field after the statement")?;
    let mut statement = vec![field(lines[start], "STATEMENT").unwrap_or("")];
    statement.extend(&lines[start + 1..end]);
    let statement = statement.join("\n").trim().to_string();
    let gold = field(lines[end], "ANSWER").unwrap_or("").to_string();
    if statement.is_empty() {
        return Err("empty statement".into());
    }
    if gold.is_empty() {
        return Err("empty answer".into());
    }
    canonical_gold(&gold).map_err(|e| format!("answer {gold:?} is not a usable expression: {e}"))?;
    Ok((statement, gold))
}

/// Asks once, re-asks once with a format reminder, then gives up.
fn ask_authored(author: &dyn Agent, prompt: &str, task: Task, templates: &Templates, slot: usize) -> Result<Draft, GenerationError> {
    let mut reason = String::new();
    for attempt in 0..2u32 {
        let prompt = if attempt == 0 {
            prompt.to_string()
        } else {
            format!("{prompt}{}", templates.format_reminder)
        };
        let reply = ask(author, prompt, task.clone(), attempt)?;
        match parse_authored(&reply.text) {
            Ok((statement, gold)) => {
                return Ok(Draft {
                    statement,
                    gold,
                    latent_difficulty: reply.latent_difficulty,
                })
            }
            Err(why) => {
                tracing::warn!(author = %author.name(), slot, attempt, reason = %why, "unreadable authored reply");
                reason = why;
            }
        }
    }
    Err(GenerationError::Malformed {
        author: author.name().clone(),
        slot,
        reason,
    })
}

/// Stage 2, or stage 1 when `meta` is absent (direct domain specification).
pub fn generate_problem(
    author: &dyn Agent,
    domain: &DomainTag,
    slot: usize,
    meta: Option<&MetaPrompt>,
    templates: &Templates,
) -> Result<Draft, GenerationError> {
    let vars = domain_vars(domain);
    let prompt = match meta {
        Some(m) => {
            let mut v = vars.to_vec();
            v.push(("meta_prompt", &m.text));
            render(&templates.generate_from_meta, &v)
        }
        None => render(&templates.generate_direct, &vars),
    };
    let task = Task::Generate {
        domain: domain.clone(),
        slot,
    };
    ask_authored(author, &prompt, task, templates, slot)
}

/// Result of stage 3.
#[derive(Clone, Debug, PartialEq)]
pub struct Amplified {
    pub draft: Draft,
    pub history: Vec<Variant>,
    pub fallbacks: usize,
}

/// `rounds` hardening rewrites. A round whose output cannot be read keeps
/// the previous version; only accepted variants enter the history.
pub fn amplify(
    author: &dyn Agent,
    domain: &DomainTag,
    slot: usize,
    draft: Draft,
    rounds: usize,
    templates: &Templates,
) -> Result<Amplified, GenerationError> {
    let mut current = draft;
    let mut history = Vec::new();
    let mut fallbacks = 0;
    for round in 1..=rounds {
        let mut vars = domain_vars(domain).to_vec();
        vars.push(("draft_statement", &current.statement));
        vars.push(("draft_gold", &current.gold));
        let prompt = render(&templates.amplify, &vars);
        let task = Task::Amplify {
            domain: domain.clone(),
            slot,
            round,
            statement: current.statement.clone(),
            gold: current.gold.clone(),
        };
        let reply = ask(author, prompt, task, 0)?;
        match parse_authored(&reply.text) {
            Ok((statement, gold)) => {
                history.push(Variant {
                    statement: statement.clone(),
                    gold: gold.clone(),
                });
                current = Draft {
                    statement,
                    gold,
                    latent_difficulty: reply.latent_difficulty.or(current.latent_difficulty),
                };
            }
            Err(why) => {
                fallbacks += 1;
                tracing::warn!(author = %author.name(), slot, round, reason = %why, "hardening round rejected, keeping previous version");
            }
        }
    }
    Ok(Amplified {
        draft: current,
        history,
        fallbacks,
    })
}

/// Runs the configured stages for one budget slot.
pub fn author_problem(
    author: &dyn Agent,
    slot: usize,
    domain: &DomainTag,
    cfg: &PipelineConfig,
    templates: &Templates,
) -> Result<Problem, GenerationError> {
    cfg.validate()?;
    let meta = if cfg.stages >= 2 {
        Some(make_meta_prompt(author, domain, templates)?)
    } else {
        None
    };
    let draft = generate_problem(author, domain, slot, meta.as_ref(), templates)?;
    let mut trace = GenerationTrace {
        meta_prompt: meta,
        draft_statement: draft.statement.clone(),
        draft_gold: draft.gold.clone(),
        amplification_history: Vec::new(),
        stages_used: cfg.stages,
        fallbacks: 0,
    };
    let last = if cfg.stages == 3 {
        let out = amplify(author, domain, slot, draft, cfg.amplification_rounds, templates)?;
        trace.amplification_history = out.history;
        trace.fallbacks = out.fallbacks;
        out.draft
    } else {
        draft
    };
    Ok(Problem {
        id: ProblemId::for_slot(author.name(), slot),
        author: author.name().clone(),
        domain: domain.clone(),
        statement: last.statement,
        gold: last.gold,
        gold_overridden: false,
        validity: Validity::Unchecked,
        stages_used: cfg.stages,
        provenance: trace,
        latent_difficulty: last.latent_difficulty,
    })
}

/// One author's whole budget, slots in schedule order.
pub fn author_problems(
    author: &dyn Agent,
    schedule: &[DomainTag],
    cfg: &PipelineConfig,
    templates: &Templates,
) -> Result<Vec<Problem>, GenerationError> {
    schedule
        .iter()
        .enumerate()
        .map(|(slot, domain)| author_problem(author, slot, domain, cfg, templates))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::agents::{FnAgent, SyntheticAgent, SyntheticParams};
    use crate::types::BroadArea;

    fn domain() -> DomainTag {
        DomainTag::new(BroadArea::DiscreteMathematics, "combinatorics").unwrap()
    }

    fn canned() -> FnAgent<impl Fn(&Request) -> Result<Reply, AgentError>> {
        FnAgent::new(ModelId::new("canned").unwrap(), |req: &Request| {
            Ok(Reply::text(match &req.task {
                Task::MetaPrompt { .. } => "Write a counting problem with a twist.".to_string(),
                Task::Amplify { round, .. } => format!("STATEMENT: Count harder, round {round}.\nANSWER: {}", 10 + round),
                _ => "STATEMENT: Count the subsets of a 3-set.\nANSWER: 8".to_string(),
            }))
        })
    }

    #[test]
    fn parse_authored_reads_multiline_statements() {
        let (s, g) = parse_authored("Sure.\nSTATEMENT: Let n = 3.\nFind 2^n.\nANSWER: $2^{3}$\n").unwrap();
        assert_eq!(s, "Let n = 3.\nFind 2^n.");
        assert_eq!(g, "$2^{3}$");
        assert!(parse_authored("STATEMENT: x\nANSWER: about seven").is_err());
        assert!(parse_authored("ANSWER: 7").is_err());
        assert!(parse_authored("STATEMENT: x\nANSWER: 1/0").is_err());
    }

    #[test]
    fn meta_prompt_is_verbatim_and_prompt_names_subfield() {
        let seen = std::sync::Mutex::new(String::new());
        let agent = FnAgent::new(ModelId::new("a").unwrap(), |req: &Request| {
            *seen.lock().unwrap() = req.prompt.clone();
            Ok(Reply::text("  keep me  "))
        });
        let m = make_meta_prompt(&agent, &domain(), &Templates::default()).unwrap();
        assert_eq!(m.text, "  keep me  ");
        assert_eq!(m.domain, domain());
        assert!(seen.lock().unwrap().contains("combinatorics"));
    }

    #[test]
    fn empty_meta_prompt_fails_after_one_retry() {
        let calls = AtomicUsize::new(0);
        let agent = FnAgent::new(ModelId::new("a").unwrap(), |_: &Request| {
            calls.fetch_add(1, Ordering::SeqCst);
            Ok(Reply::text(" \n"))
        });
        let err = make_meta_prompt(&agent, &domain(), &Templates::default()).unwrap_err();
        assert!(matches!(err, GenerationError::EmptyMetaPrompt { .. }));
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn synthetic_meta_prompt_is_canned() {
        let agent = SyntheticAgent::new(
            ModelId::new("s").unwrap(),
            SyntheticParams {
                latent_ability: 0.0,
                authoring_difficulty_mean: 0.0,
                authoring_difficulty_spread: 1.0,
                gold_error_rate: 0.0,
                ill_posed_rate: 0.0,
                seed: 1,
            },
        )
        .unwrap();
        let t = Templates::default();
        let a = make_meta_prompt(&agent, &domain(), &t).unwrap();
        let b = make_meta_prompt(&agent, &domain(), &t).unwrap();
        assert_eq!(a.text, b.text);
    }

    #[test]
    fn prose_gold_is_reasked_then_rejected() {
        let calls = AtomicUsize::new(0);
        let agent = FnAgent::new(ModelId::new("a").unwrap(), |req: &Request| {
            calls.fetch_add(1, Ordering::SeqCst);
            if req.attempt == 1 {
                assert!(req.prompt.contains("could not be read"));
            }
            Ok(Reply::text("STATEMENT: Find it.\nANSWER: the number of subsets"))
        });
        let err = generate_problem(&agent, &domain(), 0, None, &Templates::default()).unwrap_err();
        assert!(matches!(err, GenerationError::Malformed { .. }));
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn reask_can_recover() {
        let agent = FnAgent::new(ModelId::new("a").unwrap(), |req: &Request| {
            Ok(Reply::text(if req.attempt == 0 { "the answer is 8" } else { "STATEMENT: s\nANSWER: 8" }))
        });
        let d = generate_problem(&agent, &domain(), 0, None, &Templates::default()).unwrap();
        assert_eq!(d.gold, "8");
    }

    #[test]
    fn zero_rounds_is_identity() {
        let d = Draft {
            statement: "s".into(),
            gold: "1".into(),
            latent_difficulty: Some(0.3),
        };
        let out = amplify(&canned(), &domain(), 0, d.clone(), 0, &Templates::default()).unwrap();
        assert_eq!(out.draft, d);
        assert!(out.history.is_empty());
    }

    #[test]
    fn malformed_round_falls_back() {
        let agent = FnAgent::new(ModelId::new("a").unwrap(), |req: &Request| {
            Ok(Reply::text(match &req.task {
                Task::Amplify { round: 2, .. } => "STATEMENT: harder\nANSWER: lots".to_string(),
                Task::Amplify { round, .. } => format!("STATEMENT: round {round}\nANSWER: {round}"),
                _ => unreachable!(),
            }))
        });
        let d = Draft {
            statement: "s".into(),
            gold: "0".into(),
            latent_difficulty: None,
        };
        let out = amplify(&agent, &domain(), 0, d, 3, &Templates::default()).unwrap();
        assert_eq!(out.fallbacks, 1);
        assert_eq!(out.history.len(), 2);
        assert_eq!(out.draft.gold, "3");
    }

    #[test]
    fn stage_counts_shape_the_trace() {
        let t = Templates::default();
        for stages in 1..=3u8 {
            let cfg = PipelineConfig {
                stages,
                amplification_rounds: 1,
            };
            let p = author_problem(&canned(), 4, &domain(), &cfg, &t).unwrap();
            assert!(p.provenance.is_consistent());
            assert_eq!(p.stages_used, stages);
            assert_eq!(p.provenance.meta_prompt.is_some(), stages >= 2);
            assert_eq!(p.provenance.amplification_history.len(), usize::from(stages == 3));
            assert_eq!(p.provenance.final_variant(), (p.statement.as_str(), p.gold.as_str()));
            assert_eq!(p.id.as_str(), "canned-p004");
        }
        assert!(PipelineConfig {
            stages: 4,
            amplification_rounds: 0
        }
        .validate()
        .is_err());
    }
}
