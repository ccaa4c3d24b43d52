//! One-parameter logistic (Rasch) model: P(correct) = σ(s − d).

mod fit;
mod rating;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::outcome::OutcomeMatrix;
use crate::types::{ModelId, ProblemId};

pub use fit::{fit, Design, FitConfig, Params};
pub use rating::{
    author_rating, composite, rate, to_solver_rating, AuthorRating, EloScale, RatingRow, Weights, C_ELO,
};
pub(crate) use fit::fit_design;
pub(crate) use rating::rate_design;

/// Jointly estimated abilities and difficulties on the logit scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RaschFit {
    pub abilities: BTreeMap<ModelId, f64>,
    pub difficulties: BTreeMap<ProblemId, f64>,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    pub final_grad_norm: f64,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum FitError {
    #[error("no observations to fit")]
    Empty,
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error("problem {problem} was {} by every solver; its difficulty diverges without regularization", if *.all_correct { "solved" } else { "missed" })]
    DivergentProblem { problem: ProblemId, all_correct: bool },
    #[error("solver {solver} {} every attempted problem; its ability diverges", if *.all_correct { "solved" } else { "missed" })]
    DivergentSolver { solver: ModelId, all_correct: bool },
    #[error("no convergence after {iterations} sweeps (gradient norm {grad_norm:e}, last step {last_step:e}, largest |parameter| {max_abs_param:.3})")]
    NotConverged {
        iterations: usize,
        grad_norm: f64,
        last_step: f64,
        max_abs_param: f64,
    },
}

/// Logistic function σ(x), evaluated without overflow.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Probability that a solver of ability `s` answers a problem of difficulty `d`.
pub fn predict(s: f64, d: f64) -> f64 {
    sigmoid(s - d)
}

/// log σ(x) = −softplus(−x), stable for large |x|.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    -(((-x).max(0.0)) + (-x.abs()).exp().ln_1p())
}

/// Regularized log-likelihood Σ_O [y log σ + (1−y) log(1−σ)] − λ Σ_p d_p².
///
/// The penalty runs over every difficulty in `fit`.
///
/// # Panics
/// If `fit` lacks a parameter referenced by `outcomes`.
pub fn log_likelihood(fit: &RaschFit, outcomes: &OutcomeMatrix) -> f64 {
    let data: f64 = outcomes
        .iter()
        .map(|(m, p, y)| {
            let x = fit.abilities[m] - fit.difficulties[p];
            if y {
                log_sigmoid(x)
            } else {
                log_sigmoid(-x)
            }
        })
        .sum();
    let penalty: f64 = fit.difficulties.values().map(|d| d * d).sum();
    data - fit.lambda * penalty
}

/// Analytic gradient of [`log_likelihood`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub abilities: BTreeMap<ModelId, f64>,
    pub difficulties: BTreeMap<ProblemId, f64>,
}

impl Gradient {
    pub fn inf_norm(&self) -> f64 {
        self.abilities
            .values()
            .chain(self.difficulties.values())
            .fold(0.0, |m, g| m.max(g.abs()))
    }
}

pub fn gradient(fit: &RaschFit, outcomes: &OutcomeMatrix) -> Gradient {
    let mut abilities: BTreeMap<ModelId, f64> = fit.abilities.keys().map(|m| (m.clone(), 0.0)).collect();
    let mut difficulties: BTreeMap<ProblemId, f64> = fit
        .difficulties
        .iter()
        .map(|(p, d)| (p.clone(), -2.0 * fit.lambda * d))
        .collect();
    for (m, p, y) in outcomes.iter() {
        let r = f64::from(u8::from(y)) - predict(fit.abilities[m], fit.difficulties[p]);
        *abilities.get_mut(m).expect("ability present") += r;
        *difficulties.get_mut(p).expect("difficulty present") -= r;
    }
    Gradient {
        abilities,
        difficulties,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::matrix_from;

    #[test]
    fn predict_examples() {
        assert_eq!(predict(0.3, 0.3), 0.5);
        assert!((predict(10f64.ln(), 0.0) - 10.0 / 11.0).abs() < 1e-15);
        assert_eq!(predict(800.0, 0.0), 1.0);
        assert_eq!(predict(-800.0, 0.0), 0.0);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!((log_sigmoid(-1000.0) + 1000.0).abs() < 1e-9);
        assert!(log_sigmoid(1000.0).abs() < 1e-300);
    }

    fn fit_with(abilities: &[(&str, f64)], difficulties: &[(&str, f64)], lambda: f64) -> RaschFit {
        RaschFit {
            abilities: abilities.iter().map(|(m, s)| (ModelId::new(*m).unwrap(), *s)).collect(),
            difficulties: difficulties.iter().map(|(p, d)| (ProblemId::new(*p), *d)).collect(),
            lambda,
            converged: true,
            iterations: 0,
            final_grad_norm: 0.0,
        }
    }

    #[test]
    fn single_observation_at_equal_parameters() {
        let o = matrix_from(&[("a", "p", "z", true)]);
        let f = fit_with(&[("a", 0.7)], &[("p", 0.7)], 0.0);
        assert!((log_likelihood(&f, &o) - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn empty_outcomes_leave_only_the_penalty() {
        let f = fit_with(&[], &[("p", 1.5), ("q", -2.0)], 0.1);
        assert!((log_likelihood(&f, &OutcomeMatrix::new()) + 0.1 * (2.25 + 4.0)).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_matches_direct_summation() {
        let o = matrix_from(&[
            ("a", "p", "x", true),
            ("a", "q", "x", false),
            ("b", "p", "x", false),
            ("b", "q", "x", true),
        ]);
        let f = fit_with(&[("a", 0.4), ("b", -1.1)], &[("p", 0.2), ("q", 0.9)], 0.05);
        let s = |x: f64| 1.0 / (1.0 + (-x).exp());
        let want = s(0.4 - 0.2).ln() + (1.0 - s(0.4 - 0.9)).ln() + (1.0 - s(-1.1 - 0.2)).ln() + s(-1.1 - 0.9).ln()
            - 0.05 * (0.04 + 0.81);
        assert!((log_likelihood(&f, &o) - want).abs() < 1e-12);
    }
}
