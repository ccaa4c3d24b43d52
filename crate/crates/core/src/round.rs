//! One arena round: generate, solve, verify, rank. Every phase reads the
//! previous phase's artifacts, checkpoints as it goes and can be resumed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{AgentError, AgentHandle, Request, Task};
use crate::answer::{canonical_gold, judge_against, Judgment};
use crate::boot::{bootstrap_ci, rank_ranges, BootstrapSpec, IntervalRow, RankRange};
use crate::error::{ArenaError, Phase, Result};
use crate::genpipe::author_problem;
use crate::leaderboard::{leaderboard_rows, render, Format, LeaderboardRow};
use crate::manifest::RunManifest;
use crate::outcome::build_outcome_matrix;
use crate::prompts::{last_field, render as render_prompt, Templates};
use crate::rasch::{fit, rate, EloScale, RaschFit, RatingRow};
use crate::schedule::plan_domain_schedule;
use crate::store::{
    RunStore, Checkpoint, FIT, INTERVALS, LEADERBOARD_JSON, LEADERBOARD_MD, PROBLEMS, RANGES, RECORDS, REPORT, VERDICTS,
};
use crate::types::{ModelId, Problem, ProblemId, RecordFlag, Role, SolveRecord, Validity};
use crate::verifier::{apply_verdict, compare_backbones, needs_verification, verify, AgreementReport, CandidateSet, Verdict};

const K_PROBLEMS: &str = "problems";
const K_RECORDS: &str = "records";
const K_VERDICTS: &str = "verdicts";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub problems: usize,
    pub valid_problems: usize,
    pub excluded: usize,
    pub overridden: usize,
    pub verified: usize,
    pub records: usize,
    pub observations: usize,
    pub missing_answers: usize,
    pub parse_failures: usize,
    pub eval_failures: usize,
    pub gold_errors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    pub final_grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_hash: String,
    pub anchor_model: ModelId,
    pub anchor_rating: f64,
    pub bootstrap: BootstrapSpec,
    pub fit: FitSummary,
    pub counts: Counts,
    pub ratings: Vec<RatingRow>,
    pub intervals: Vec<IntervalRow>,
    pub ranges: BTreeMap<ModelId, RankRange>,
    pub leaderboard: Vec<LeaderboardRow>,
    /// Models with no valid authored problem, hence no composite.
    pub unrated_authors: Vec<ModelId>,
}

/// Problems and records after verdicts: excluded problems are marked
/// invalid, overridden golds re-judged, unverified problems valid.
pub fn verified_state(
    problems: &[Problem],
    records: &[SolveRecord],
    verdicts: &[Verdict],
) -> Result<(Vec<Problem>, Vec<SolveRecord>)> {
    let mut problems = problems.to_vec();
    let mut records = records.to_vec();
    let mut by_problem: HashMap<&ProblemId, &Verdict> = HashMap::new();
    for v in verdicts {
        if by_problem.insert(&v.problem, v).is_some() {
            return Err(ArenaError::Integrity(format!("two verdicts for problem {}", v.problem)));
        }
    }
    let known: HashSet<&ProblemId> = problems.iter().map(|p| &p.id).collect();
    if let Some(v) = verdicts.iter().find(|v| !known.contains(&v.problem)) {
        return Err(ArenaError::Integrity(format!("verdict for unknown problem {}", v.problem)));
    }
    let mut rows: HashMap<ProblemId, Vec<usize>> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        rows.entry(r.problem.clone()).or_default().push(i);
    }
    for p in problems.iter_mut() {
        let idx = rows.get(&p.id).map(Vec::as_slice).unwrap_or(&[]);
        match by_problem.get(&p.id) {
            Some(v) => {
                let mut own: Vec<SolveRecord> = idx.iter().map(|&i| records[i].clone()).collect();
                apply_verdict(p, v, &mut own)?;
                for (&i, r) in idx.iter().zip(own) {
                    records[i] = r;
                }
            }
            None => {
                let own: Vec<&SolveRecord> = idx.iter().map(|&i| &records[i]).collect();
                if needs_verification(p, &own) {
                    return Err(ArenaError::Integrity(format!("problem {} has a failed attempt but no verdict", p.id)));
                }
                if p.validity == Validity::Unchecked {
                    p.validity = Validity::Valid;
                }
            }
        }
    }
    Ok((problems, records))
}

/// Agents, templates and a worker pool bound to one run directory.
pub struct Arena {
    store: RunStore,
    agents: BTreeMap<ModelId, AgentHandle>,
    templates: Templates,
    pool: rayon::ThreadPool,
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| ArenaError::Config(format!("cannot start worker pool: {e}")))
}

/// Fails with the first error in input order, after every item has run.
fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

impl Arena {
    pub fn new(store: RunStore) -> Result<Self> {
        let agents = store.manifest().build_agents()?;
        Self::with_agents(store, agents)
    }

    /// Uses the given agents instead of the manifest bindings; every
    /// manifest model needs one.
    pub fn with_agents(store: RunStore, agents: Vec<AgentHandle>) -> Result<Self> {
        let manifest = store.manifest();
        manifest.validate()?;
        let agents: BTreeMap<ModelId, AgentHandle> = agents.into_iter().map(|a| (a.name().clone(), a)).collect();
        if let Some(m) = manifest.models.iter().find(|m| !agents.contains_key(&m.name)) {
            return Err(ArenaError::Config(format!("no agent for model {}", m.name)));
        }
        let templates = match &manifest.templates_dir {
            Some(dir) => Templates::load(dir)?,
            None => Templates::default(),
        };
        Ok(Arena {
            pool: pool(manifest.parallelism)?,
            store,
            agents,
            templates,
        })
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }

    fn manifest(&self) -> &RunManifest {
        self.store.manifest()
    }

    fn checkpoint(&self, name: &str, kind: &str) -> Result<Mutex<Checkpoint>> {
        Ok(Mutex::new(self.store.checkpoint(name, kind)?))
    }

    /// Phase 1. Returns the persisted problems if the phase already ran.
    pub fn generate(&self) -> Result<Vec<Problem>> {
        if self.store.exists(PROBLEMS) {
            return Ok(self.store.read_jsonl(PROBLEMS, K_PROBLEMS)?);
        }
        self.generate_inner()
            .map_err(|e| e.in_phase(Phase::Generate, self.store.checkpoint_path(PROBLEMS)))
    }

    fn generate_inner(&self) -> Result<Vec<Problem>> {
        let m = self.manifest();
        let pipeline = m.pipeline();
        let mut problems: Vec<Problem> = self.store.read_partial(PROBLEMS, K_PROBLEMS)?;
        let done: HashSet<ProblemId> = problems.iter().map(|p| p.id.clone()).collect();
        if !done.is_empty() {
            tracing::info!(resumed = done.len(), "resuming generation");
        }
        let ckpt = self.checkpoint(PROBLEMS, K_PROBLEMS)?;
        let authors: Vec<(usize, &ModelId)> = m
            .models
            .iter()
            .enumerate()
            .filter(|(_, s)| s.roles.contains(&Role::Author))
            .map(|(i, s)| (i, &s.name))
            .collect();
        let results: Vec<Result<Vec<Problem>>> = self.pool.install(|| {
            authors
                .par_iter()
                .map(|&(i, name)| {
                    let agent = &self.agents[name];
                    let schedule = plan_domain_schedule(m.problems_per_model, &m.domains, m.seed.wrapping_add(i as u64))?;
                    let mut out = Vec::new();
                    for (slot, domain) in schedule.iter().enumerate() {
                        if done.contains(&ProblemId::for_slot(name, slot)) {
                            continue;
                        }
                        let p = author_problem(agent.as_ref(), slot, domain, &pipeline, &self.templates)?;
                        ckpt.lock().expect("checkpoint lock").append(&p)?;
                        out.push(p);
                    }
                    Ok(out)
                })
                .collect()
        });
        problems.extend(first_error(results)?.into_iter().flatten());
        problems.sort_by(|a, b| a.id.cmp(&b.id));
        problems.dedup_by(|a, b| a.id == b.id);
        let fallbacks: usize = problems.iter().map(|p| p.provenance.fallbacks).sum();
        tracing::info!(problems = problems.len(), fallbacks, "generation finished");
        self.store.write_jsonl(PROBLEMS, K_PROBLEMS, &problems)?;
        self.store.clear_checkpoint(PROBLEMS)?;
        Ok(problems)
    }

    /// Phase 2: every solver attempts every problem it did not author.
    pub fn solve(&self) -> Result<Vec<SolveRecord>> {
        if self.store.exists(RECORDS) {
            return Ok(self.store.read_jsonl(RECORDS, K_RECORDS)?);
        }
        let problems: Vec<Problem> = self.store.read_jsonl(PROBLEMS, K_PROBLEMS)?;
        self.solve_inner(&problems)
            .map_err(|e| e.in_phase(Phase::Solve, self.store.checkpoint_path(RECORDS)))
    }

    fn solve_inner(&self, problems: &[Problem]) -> Result<Vec<SolveRecord>> {
        let mut records: Vec<SolveRecord> = self.store.read_partial(RECORDS, K_RECORDS)?;
        let done: HashSet<(ModelId, ProblemId)> = records.iter().map(|r| (r.solver.clone(), r.problem.clone())).collect();
        let ckpt = self.checkpoint(RECORDS, K_RECORDS)?;
        let solvers: Vec<&ModelId> = self.manifest().with_role(Role::Solver).iter().map(|s| &s.name).collect();
        let tasks: Vec<(&Problem, &ModelId)> = problems
            .iter()
            .flat_map(|p| solvers.iter().map(move |s| (p, *s)))
            .filter(|(p, s)| p.author != **s && !done.contains(&((*s).clone(), p.id.clone())))
            .collect();
        let golds: HashMap<&ProblemId, Option<_>> = problems
            .iter()
            .map(|p| {
                let g = canonical_gold(&p.gold);
                if let Err(e) = &g {
                    tracing::warn!(problem = %p.id, error = %e, "gold cannot be judged against");
                }
                (&p.id, g.ok())
            })
            .collect();
        let results: Vec<Result<SolveRecord>> = self.pool.install(|| {
            tasks
                .par_iter()
                .map(|&(p, s)| {
                    let r = self.attempt(p, s, golds[&p.id].as_ref())?;
                    ckpt.lock().expect("checkpoint lock").append(&r)?;
                    Ok(r)
                })
                .collect()
        });
        records.extend(first_error(results)?);
        records.sort_by(|a, b| (&a.problem, &a.solver).cmp(&(&b.problem, &b.solver)));
        records.dedup_by(|a, b| a.problem == b.problem && a.solver == b.solver);
        self.store.write_jsonl(RECORDS, K_RECORDS, &records)?;
        self.store.clear_checkpoint(RECORDS)?;
        Ok(records)
    }

    fn attempt(&self, p: &Problem, solver: &ModelId, gold: Option<&crate::answer::CanonicalForm>) -> Result<SolveRecord> {
        let request = Request {
            prompt: render_prompt(&self.templates.solve, &[("statement", &p.statement)]),
            task: Task::Solve {
                problem: p.id.clone(),
                statement: p.statement.clone(),
                latent_difficulty: p.latent_difficulty,
            },
            attempt: 0,
        };
        let (answer, trace) = match self.agents[solver].respond(&request) {
            Ok(reply) => (last_field(&reply.text, "ANSWER").unwrap_or("").to_string(), reply.text),
            Err(e @ (AgentError::Endpoint { .. } | AgentError::Protocol(_))) => {
                tracing::warn!(solver = %solver, problem = %p.id, error = %e, "no answer, scoring 0");
                (String::new(), String::new())
            }
            Err(e) => return Err(e.into()),
        };
        let judgment = match gold {
            Some(g) => judge_against(&answer, g),
            None => Judgment {
                outcome: false,
                flag: Some(RecordFlag::GoldError),
            },
        };
        if judgment.flag == Some(RecordFlag::MissingAnswer) {
            tracing::warn!(solver = %solver, problem = %p.id, "missing answer recorded as incorrect");
        }
        Ok(SolveRecord {
            solver: solver.clone(),
            problem: p.id.clone(),
            answer,
            trace,
            outcome: judgment.outcome,
            flag: judgment.flag,
        })
    }

    /// Phase 3 with the manifest's backbone.
    pub fn verify(&self) -> Result<Vec<Verdict>> {
        if self.store.exists(VERDICTS) {
            return Ok(self.store.read_jsonl(VERDICTS, K_VERDICTS)?);
        }
        let problems: Vec<Problem> = self.store.read_jsonl(PROBLEMS, K_PROBLEMS)?;
        let records: Vec<SolveRecord> = self.store.read_jsonl(RECORDS, K_RECORDS)?;
        let backbone = self.manifest().backbone()?;
        self.verify_inner(&problems, &records, &backbone, true)
            .map_err(|e| e.in_phase(Phase::Verify, self.store.checkpoint_path(VERDICTS)))
            .and_then(|v| {
                self.store.write_jsonl(VERDICTS, K_VERDICTS, &v)?;
                self.store.clear_checkpoint(VERDICTS)?;
                Ok(v)
            })
    }

    fn verify_inner(&self, problems: &[Problem], records: &[SolveRecord], backbone: &ModelId, resume: bool) -> Result<Vec<Verdict>> {
        let agent = self
            .agents
            .get(backbone)
            .ok_or_else(|| ArenaError::Config(format!("no agent for backbone {backbone}")))?;
        let mut by_problem: HashMap<&ProblemId, Vec<&SolveRecord>> = HashMap::new();
        for r in records {
            by_problem.entry(&r.problem).or_default().push(r);
        }
        let mut verdicts: Vec<Verdict> = if resume {
            self.store.read_partial(VERDICTS, K_VERDICTS)?
        } else {
            Vec::new()
        };
        let done: HashSet<ProblemId> = verdicts.iter().map(|v| v.problem.clone()).collect();
        let ckpt = if resume { Some(self.checkpoint(VERDICTS, K_VERDICTS)?) } else { None };
        let pending: Vec<(&Problem, &[&SolveRecord])> = problems
            .iter()
            .map(|p| (p, by_problem.get(&p.id).map(Vec::as_slice).unwrap_or(&[])))
            .filter(|(p, rs)| !done.contains(&p.id) && needs_verification(p, rs))
            .collect();
        let samples = self.manifest().verifier_samples;
        let results: Vec<Result<Verdict>> = self.pool.install(|| {
            pending
                .par_iter()
                .map(|&(p, rs)| {
                    let set = CandidateSet::build(p, rs);
                    let v = verify(p, &set, agent.as_ref(), samples, &self.templates)?;
                    if let Some(c) = &ckpt {
                        c.lock().expect("checkpoint lock").append(&v)?;
                    }
                    Ok(v)
                })
                .collect()
        });
        verdicts.extend(first_error(results)?);
        verdicts.sort_by(|a, b| a.problem.cmp(&b.problem));
        verdicts.dedup_by(|a, b| a.problem == b.problem);
        Ok(verdicts)
    }

    /// Re-runs verification with another backbone and compares it with the
    /// persisted verdicts. Writes `verdicts.<backbone>.jsonl` and
    /// `agreement.<backbone>.json`.
    pub fn replay_verify(&self, backbone: &ModelId) -> Result<AgreementReport> {
        let problems: Vec<Problem> = self.store.read_jsonl(PROBLEMS, K_PROBLEMS)?;
        let records: Vec<SolveRecord> = self.store.read_jsonl(RECORDS, K_RECORDS)?;
        let baseline: Vec<Verdict> = self.store.read_jsonl(VERDICTS, K_VERDICTS)?;
        let replay = self.verify_inner(&problems, &records, backbone, false)?;
        self.store
            .write_jsonl(&format!("verdicts.{backbone}.jsonl"), K_VERDICTS, &replay)?;
        let report = compare_backbones(&baseline, &replay)?;
        self.store
            .write_json(&format!("agreement.{backbone}.json"), "agreement", &report)?;
        Ok(report)
    }

    pub fn rank(&self) -> Result<RunReport> {
        self.pool
            .install(|| rank(&self.store))
            .map_err(|e| e.in_phase(Phase::Rank, self.store.path(REPORT)))
    }

    /// All four phases, skipping any already persisted.
    pub fn run(&self) -> Result<RunReport> {
        self.generate()?;
        self.solve()?;
        self.verify()?;
        self.rank()
    }
}

/// Phase 4 from persisted artifacts. Writes fit, intervals, ranges, report
/// and leaderboards; reads nothing it writes.
pub fn rank(store: &RunStore) -> Result<RunReport> {
    let m = store.manifest();
    let problems: Vec<Problem> = store.read_jsonl(PROBLEMS, K_PROBLEMS)?;
    let records: Vec<SolveRecord> = store.read_jsonl(RECORDS, K_RECORDS)?;
    let verdicts: Vec<Verdict> = store.read_jsonl(VERDICTS, K_VERDICTS)?;
    let (problems, records) = verified_state(&problems, &records, &verdicts)?;
    let matrix = build_outcome_matrix(&records, &problems)?;
    let fitted: RaschFit = fit(&matrix, &m.fit_config())?;
    let scale = EloScale::new(&fitted, &m.anchor_model, m.anchor_rating)?;
    let ratings = rate(&fitted, &problems, &scale, &m.weights);
    let spec = m.bootstrap_spec();
    let intervals = bootstrap_ci(&matrix, &problems, &spec, &m.rank_config())?;
    let ranges = rank_ranges(&intervals);
    let leaderboard = leaderboard_rows(&ratings, &intervals, &ranges);

    let flagged = |f: RecordFlag| records.iter().filter(|r| r.flag == Some(f)).count();
    let counts = Counts {
        problems: problems.len(),
        valid_problems: problems.iter().filter(|p| p.validity == Validity::Valid).count(),
        excluded: problems.iter().filter(|p| p.validity == Validity::Invalid).count(),
        overridden: problems.iter().filter(|p| p.gold_overridden).count(),
        verified: verdicts.len(),
        records: records.len(),
        observations: matrix.len(),
        missing_answers: flagged(RecordFlag::MissingAnswer),
        parse_failures: flagged(RecordFlag::ParseFailure),
        eval_failures: flagged(RecordFlag::EvalFailure),
        gold_errors: flagged(RecordFlag::GoldError),
    };
    let unrated_authors: Vec<ModelId> = ratings
        .iter()
        .filter(|r| r.composite.is_none())
        .map(|r| r.model.clone())
        .collect();
    for model in &unrated_authors {
        tracing::warn!(model = %model, "no valid authored problem, composite omitted");
    }
    let report = RunReport {
        run_hash: store.run_hash().to_string(),
        anchor_model: m.anchor_model.clone(),
        anchor_rating: m.anchor_rating,
        bootstrap: spec,
        fit: FitSummary {
            lambda: fitted.lambda,
            converged: fitted.converged,
            iterations: fitted.iterations,
            final_grad_norm: fitted.final_grad_norm,
        },
        counts,
        ratings,
        intervals,
        ranges,
        leaderboard,
        unrated_authors,
    };
    store.write_json(FIT, "fit", &fitted)?;
    store.write_json(INTERVALS, "intervals", &report.intervals)?;
    store.write_json(RANGES, "ranges", &report.ranges)?;
    store.write_json(REPORT, "report", &report)?;
    let confidence = 1.0 - 2.0 * m.alpha;
    store.write_text(LEADERBOARD_MD, &render(&report.leaderboard, Format::Markdown, confidence))?;
    store.write_text(LEADERBOARD_JSON, &render(&report.leaderboard, Format::Json, confidence))?;
    Ok(report)
}

/// Creates (or resumes) the run in `out` and executes every phase.
pub fn run_round(manifest: &RunManifest, out: &Path) -> Result<RunReport> {
    manifest.validate()?;
    Arena::new(RunStore::create(out, manifest)?)?.run()
}

/// [`run_round`] restricted to synthetic participants.
pub fn simulate(manifest: &RunManifest, out: &Path) -> Result<RunReport> {
    if !manifest.is_synthetic() {
        return Err(ArenaError::Config("simulate requires every model to be synthetic".into()));
    }
    run_round(manifest, out)
}
