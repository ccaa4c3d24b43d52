//! Simulated participants with known latent parameters. Every random draw
//! comes from a stream keyed by the agent seed and the item it concerns, so
//! results do not depend on call order.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Agent, AgentError, Reply, Request, Task};
use crate::answer::canonicalize_str;
use crate::genpipe::GenerationTrace;
use crate::rasch::predict;
use crate::types::{DomainTag, ModelId, Problem, ProblemId, Validity};

/// Statements containing this phrase are deliberately ambiguous.
const ILL_POSED_MARKER: &str = "or of its reciprocal";

fn default_ill_posed_rate() -> f64 {
    0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    /// s* in logits.
    pub latent_ability: f64,
    pub authoring_difficulty_mean: f64,
    pub authoring_difficulty_spread: f64,
    pub gold_error_rate: f64,
    /// Probability that an authored item is ambiguous and should be excluded.
    #[serde(default = "default_ill_posed_rate")]
    pub ill_posed_rate: f64,
    pub seed: u64,
}

/// One templated item and its ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticItem {
    pub statement: String,
    /// The gold the author reports, possibly perturbed.
    pub gold: String,
    pub true_value: BigRational,
    pub latent_difficulty: f64,
    pub gold_perturbed: bool,
    pub ill_posed: bool,
}

pub struct SyntheticAgent {
    name: ModelId,
    params: SyntheticParams,
}

impl SyntheticAgent {
    pub fn new(name: ModelId, params: SyntheticParams) -> Result<Self, AgentError> {
        let finite = [
            params.latent_ability,
            params.authoring_difficulty_mean,
            params.authoring_difficulty_spread,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite || params.authoring_difficulty_spread < 0.0 {
            return Err(AgentError::Config(format!(
                "{name}: latent parameters must be finite with a nonnegative spread"
            )));
        }
        for (label, rate) in [("gold_error_rate", params.gold_error_rate), ("ill_posed_rate", params.ill_posed_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(AgentError::Config(format!("{name}: {label} {rate} is outside [0, 1]")));
            }
        }
        Ok(SyntheticAgent { name, params })
    }

    pub fn params(&self) -> &SyntheticParams {
        &self.params
    }

    fn rng(&self, parts: &[&[u8]]) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.params.seed.to_le_bytes());
        for part in parts {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part);
        }
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest[..32]);
        ChaCha8Rng::from_seed(seed)
    }

    fn uniform(&self, parts: &[&[u8]]) -> f64 {
        self.rng(parts).random::<f64>()
    }

    /// The item for budget slot `slot` after `round` hardening rounds. The
    /// latent difficulty and the perturbation decisions belong to the slot.
    pub fn item(&self, slot: usize, round: usize) -> SyntheticItem {
        let slot_key = (slot as u64).to_le_bytes();
        let round_key = (round as u64).to_le_bytes();
        let mut rng = self.rng(&[b"item", &slot_key, &round_key]);
        let mut n = || rng.random_range(2i64..=40);
        let (a, b, c, d) = (n(), n(), n(), n());
        let r = |v: i64| BigRational::from_integer(BigInt::from(v));
        let template = self.rng(&[b"template", &slot_key, &round_key]).random_range(0..5);
        let (expr, value) = match template {
            0 => (format!("{a}*{b} + {c}"), r(a * b + c)),
            1 => (format!("{a}^2 - {b}*{c}"), r(a * a - b * c)),
            2 => (format!("({a} + {b})/{c}"), r(a + b) / r(c)),
            3 => (format!("{a}*({b} - {c}) + {d}"), r(a * (b - c) + d)),
            _ => (format!("\\frac{{{a}}}{{{b}}} + \\frac{{{c}}}{{{d}}}"), r(a) / r(b) + r(c) / r(d)),
        };
        let z: f64 = self.rng(&[b"difficulty", &slot_key]).sample(StandardNormal);
        let latent_difficulty = self.params.authoring_difficulty_mean + self.params.authoring_difficulty_spread * z;
        let gold_perturbed = self.uniform(&[b"gold", &slot_key]) < self.params.gold_error_rate;
        let ill_posed = self.uniform(&[b"ill-posed", &slot_key]) < self.params.ill_posed_rate;
        let statement = if ill_posed {
            format!("Compute the exact value of `{expr}`, {ILL_POSED_MARKER} if you prefer.")
        } else {
            format!("Compute the exact value of `{expr}`.")
        };
        let reported = if gold_perturbed { &value - BigRational::one() } else { value.clone() };
        SyntheticItem {
            statement,
            gold: format_rational(&reported),
            true_value: value,
            latent_difficulty,
            gold_perturbed,
            ill_posed,
        }
    }

    /// K single-stage problems for the given domain schedule.
    pub fn synth_author(&self, schedule: &[DomainTag]) -> Vec<Problem> {
        schedule
            .iter()
            .enumerate()
            .map(|(slot, domain)| {
                let item = self.item(slot, 0);
                Problem {
                    id: ProblemId::for_slot(&self.name, slot),
                    author: self.name.clone(),
                    domain: domain.clone(),
                    provenance: GenerationTrace::direct(item.statement.clone(), item.gold.clone()),
                    statement: item.statement,
                    gold: item.gold,
                    gold_overridden: false,
                    validity: Validity::Unchecked,
                    stages_used: 1,
                    latent_difficulty: Some(item.latent_difficulty),
                }
            })
            .collect()
    }

    /// The true value with probability σ(s* − d*), otherwise the true value
    /// plus one. Fails when the statement has no evaluable expression.
    pub fn answer(&self, problem: &ProblemId, statement: &str, latent_difficulty: f64) -> Result<String, AgentError> {
        let truth = true_value(statement)?;
        let p = predict(self.params.latent_ability, latent_difficulty);
        let u = self.uniform(&[b"solve", problem.as_str().as_bytes()]);
        Ok(if u < p {
            format_rational(&truth)
        } else {
            format_rational(&(truth + BigRational::one()))
        })
    }

    pub fn synth_solve(&self, problem: &Problem) -> Result<String, AgentError> {
        let d = problem
            .latent_difficulty
            .ok_or_else(|| AgentError::Protocol(format!("problem {} carries no latent difficulty", problem.id)))?;
        self.answer(&problem.id, &problem.statement, d)
    }

    fn verdict(&self, statement: &str, candidates: &[String]) -> Result<String, AgentError> {
        if statement.contains(ILL_POSED_MARKER) {
            return Ok("VALID: no\nANSWER: none\nRATIONALE: the statement admits two readings".into());
        }
        let truth = true_value(statement)?;
        let hit = candidates.iter().position(|c| {
            canonicalize_str(c)
                .ok()
                .and_then(|f| f.exact_value)
                .is_some_and(|v| v == truth)
        });
        Ok(match hit {
            Some(i) => format!("VALID: yes\nANSWER: {}\nRATIONALE: recomputed the expression", i + 1),
            None => "VALID: no\nANSWER: none\nRATIONALE: no candidate matches the recomputed value".into(),
        })
    }

    fn meta_prompt(domain: &DomainTag) -> String {
        format!(
            "Other models in this arena will attempt your problem. Write one hard, self-contained problem in {} ({}) whose answer is a single closed-form number.",
            domain.subfield,
            domain.broad_area
        )
    }

    fn authored(item: &SyntheticItem) -> Reply {
        Reply {
            text: format!("STATEMENT: {}\nANSWER: {}", item.statement, item.gold),
            latent_difficulty: Some(item.latent_difficulty),
        }
    }
}

impl Agent for SyntheticAgent {
    fn name(&self) -> &ModelId {
        &self.name
    }

    fn respond(&self, request: &Request) -> Result<Reply, AgentError> {
        match &request.task {
            Task::MetaPrompt { domain } => Ok(Reply::text(Self::meta_prompt(domain))),
            Task::Generate { slot, .. } => Ok(Self::authored(&self.item(*slot, 0))),
            Task::Amplify { slot, round, .. } => Ok(Self::authored(&self.item(*slot, *round))),
            Task::Solve {
                problem,
                statement,
                latent_difficulty,
            } => {
                let d = latent_difficulty
                    .ok_or_else(|| AgentError::Protocol(format!("problem {problem} carries no latent difficulty")))?;
                let answer = self.answer(problem, statement, d)?;
                Ok(Reply::text(format!("Evaluated the expression exactly.\nANSWER: {answer}")))
            }
            Task::Verify {
                statement, candidates, ..
            } => self.verdict(statement, candidates).map(Reply::text),
        }
    }
}

/// Exact value of the backtick-quoted expression in a synthetic statement.
fn true_value(statement: &str) -> Result<BigRational, AgentError> {
    let expr = statement
        .split('`')
        .nth(1)
        .ok_or_else(|| AgentError::Protocol("statement quotes no expression".into()))?;
    canonicalize_str(expr)
        .ok()
        .and_then(|f| f.exact_value)
        .ok_or_else(|| AgentError::Protocol(format!("expression {expr:?} has no exact value")))
}

/// `p` or `p/q` in lowest terms, sign on the numerator.
pub(crate) fn format_rational(v: &BigRational) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else if v.is_negative() {
        format!("-{}/{}", v.numer().abs(), v.denom())
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}
