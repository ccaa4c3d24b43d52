//! Regularized joint maximum likelihood by alternating damped-Newton coordinate updates.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{sigmoid, FitError, RaschFit};
use crate::outcome::OutcomeMatrix;
use crate::types::{ModelId, ProblemId};

/// Largest change applied to one parameter in one update.
const MAX_STEP: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    pub lambda: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// `None` starts from all zeros; `Some(seed)` from a uniform jitter in [−1, 1].
    pub init_seed: Option<u64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            lambda: 0.01,
            tolerance: 1e-8,
            max_iterations: 500,
            init_seed: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(FitError::Config(format!("lambda must be a nonnegative number, got {}", self.lambda)));
        }
        if !(self.tolerance > 0.0) {
            return Err(FitError::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(FitError::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Index form of an outcome matrix with adjacency in both directions.
#[derive(Clone, Debug)]
pub struct Design {
    pub(crate) solvers: Vec<ModelId>,
    pub(crate) problems: Vec<ProblemId>,
    pub(crate) authors: Vec<ModelId>,
    pub(crate) author_of: Vec<usize>,
    by_problem: Adjacency,
    by_solver: Adjacency,
}

/// Compressed rows: row `i` holds `(other[k], y[k])` for `k` in `offsets[i]..offsets[i+1]`.
#[derive(Clone, Debug)]
struct Adjacency {
    offsets: Vec<usize>,
    other: Vec<u32>,
    y: Vec<f64>,
}

impl Adjacency {
    fn build(rows: usize, triples: impl Iterator<Item = (usize, usize, bool)> + Clone) -> Self {
        let mut counts = vec![0usize; rows + 1];
        for (r, _, _) in triples.clone() {
            counts[r + 1] += 1;
        }
        for i in 0..rows {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let n = offsets[rows];
        let mut other = vec![0u32; n];
        let mut y = vec![0.0; n];
        let mut next = counts;
        for (r, o, v) in triples {
            let at = next[r];
            other[at] = o as u32;
            y[at] = f64::from(u8::from(v));
            next[r] += 1;
        }
        Adjacency { offsets, other, y }
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.other[range.clone()]
            .iter()
            .zip(&self.y[range])
            .map(|(&o, &y)| (o as usize, y))
    }

    fn row_len(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }
}

impl Design {
    pub fn new(outcomes: &OutcomeMatrix) -> Self {
        let solvers: Vec<ModelId> = outcomes.solvers().into_iter().cloned().collect();
        let problems: Vec<ProblemId> = outcomes.problems().cloned().collect();
        let s_index: BTreeMap<&ModelId, usize> = solvers.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let p_index: BTreeMap<&ProblemId, usize> = problems.iter().enumerate().map(|(i, p)| (p, i)).collect();
        let mut authors: Vec<ModelId> = problems
            .iter()
            .map(|p| outcomes.author_of(p).expect("every problem has an author").clone())
            .collect();
        authors.sort();
        authors.dedup();
        let author_of = problems
            .iter()
            .map(|p| {
                let a = outcomes.author_of(p).expect("every problem has an author");
                authors.binary_search(a).expect("author listed")
            })
            .collect();
        let triples: Vec<(usize, usize, bool)> = outcomes.iter().map(|(m, p, y)| (s_index[m], p_index[p], y)).collect();
        let by_solver = Adjacency::build(solvers.len(), triples.iter().copied());
        let by_problem = Adjacency::build(problems.len(), triples.iter().map(|&(m, p, y)| (p, m, y)));
        Design {
            solvers,
            problems,
            authors,
            author_of,
            by_problem,
            by_solver,
        }
    }

    pub fn solvers(&self) -> &[ModelId] {
        &self.solvers
    }

    pub fn problems(&self) -> &[ProblemId] {
        &self.problems
    }

    pub fn n_observations(&self) -> usize {
        self.by_problem.other.len()
    }

    pub(crate) fn n_problems(&self) -> usize {
        self.problems.len()
    }
}

/// Parameter vectors indexed like [`Design::solvers`] and [`Design::problems`].
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub s: Vec<f64>,
    pub d: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct FitOutcome {
    pub params: Params,
    pub iterations: usize,
    pub grad_norm: f64,
}

fn check_separation(design: &Design, w: &[f64], lambda: f64) -> Result<(), FitError> {
    if lambda == 0.0 {
        for (p, id) in design.problems.iter().enumerate() {
            if w[p] == 0.0 || design.by_problem.row_len(p) == 0 {
                continue;
            }
            let correct: f64 = design.by_problem.row(p).map(|(_, y)| y).sum();
            let n = design.by_problem.row_len(p) as f64;
            if correct == 0.0 || correct == n {
                return Err(FitError::DivergentProblem {
                    problem: id.clone(),
                    all_correct: correct == n,
                });
            }
        }
    }
    for (m, id) in design.solvers.iter().enumerate() {
        let (mut correct, mut total) = (0.0, 0.0);
        for (p, y) in design.by_solver.row(m) {
            correct += w[p] * y;
            total += w[p];
        }
        if total > 0.0 && (correct == 0.0 || correct == total) {
            return Err(FitError::DivergentSolver {
                solver: id.clone(),
                all_correct: correct == total,
            });
        }
    }
    Ok(())
}

fn clamp_step(g: f64, h: f64) -> f64 {
    if h > 0.0 {
        (g / h).clamp(-MAX_STEP, MAX_STEP)
    } else {
        0.0
    }
}

/// ∞-norm of the gradient. Solver components carry the problem weights;
/// difficulty components are per copy, so weights cancel.
fn grad_norm(design: &Design, w: &[f64], lambda: f64, x: &Params) -> f64 {
    let mut norm: f64 = 0.0;
    for m in 0..design.solvers.len() {
        let g: f64 = design
            .by_solver
            .row(m)
            .map(|(p, y)| w[p] * (y - sigmoid(x.s[m] - x.d[p])))
            .sum();
        norm = norm.max(g.abs());
    }
    for p in 0..design.problems.len() {
        if w[p] == 0.0 {
            continue;
        }
        let g: f64 = design
            .by_problem
            .row(p)
            .map(|(m, y)| sigmoid(x.s[m] - x.d[p]) - y)
            .sum::<f64>()
            - 2.0 * lambda * x.d[p];
        norm = norm.max(g.abs());
    }
    norm
}

/// Maximizes the weighted objective Σ_p w_p (Σ_m ℓ_mp − λ d_p²).
///
/// A weight of `k` is equivalent to `k` independent copies of the problem.
/// Problems of weight 0 keep their starting difficulty.
pub(crate) fn fit_design(
    design: &Design,
    weights: Option<&[f64]>,
    cfg: &FitConfig,
    start: Option<&Params>,
) -> Result<FitOutcome, FitError> {
    cfg.validate()?;
    if design.n_observations() == 0 {
        return Err(FitError::Empty);
    }
    let ones;
    let w = match weights {
        Some(w) => w,
        None => {
            ones = vec![1.0; design.problems.len()];
            &ones
        }
    };
    check_separation(design, w, cfg.lambda)?;
    let lambda = cfg.lambda;
    let mut x = match (start, cfg.init_seed) {
        (Some(p), _) => p.clone(),
        (None, Some(seed)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Params {
                s: (0..design.solvers.len()).map(|_| rng.random_range(-1.0..=1.0)).collect(),
                d: (0..design.problems.len()).map(|_| rng.random_range(-1.0..=1.0)).collect(),
            }
        }
        (None, None) => Params {
            s: vec![0.0; design.solvers.len()],
            d: vec![0.0; design.problems.len()],
        },
    };
    let mut last_step = f64::INFINITY;
    for it in 1..=cfg.max_iterations {
        let mut max_step: f64 = 0.0;
        for m in 0..design.solvers.len() {
            let (mut g, mut h) = (0.0, 0.0);
            for (p, y) in design.by_solver.row(m) {
                let q = sigmoid(x.s[m] - x.d[p]);
                g += w[p] * (y - q);
                h += w[p] * q * (1.0 - q);
            }
            let step = clamp_step(g, h);
            x.s[m] += step;
            max_step = max_step.max(step.abs());
        }
        for p in 0..design.problems.len() {
            if w[p] == 0.0 || (lambda == 0.0 && design.by_problem.row_len(p) == 0) {
                continue;
            }
            let (mut g, mut h) = (-2.0 * lambda * x.d[p], 2.0 * lambda);
            for (m, y) in design.by_problem.row(p) {
                let q = sigmoid(x.s[m] - x.d[p]);
                g += q - y;
                h += q * (1.0 - q);
            }
            let step = clamp_step(g, h);
            x.d[p] += step;
            max_step = max_step.max(step.abs());
        }
        // Shifting every s and d by c leaves the data term unchanged. Without
        // a penalty that pins the mean ability; with one, c = −(weighted mean
        // difficulty) maximizes the penalty exactly. Coordinate steps alone
        // move along this nearly flat direction very slowly.
        let c = if lambda == 0.0 {
            -x.s.iter().sum::<f64>() / x.s.len() as f64
        } else {
            let total: f64 = w.iter().sum();
            -w.iter().zip(&x.d).map(|(w, d)| w * d).sum::<f64>() / total
        };
        x.s.iter_mut().for_each(|v| *v += c);
        x.d.iter_mut().zip(w).filter(|(_, w)| **w > 0.0).for_each(|(v, _)| *v += c);
        let max_step = max_step.max(c.abs());
        if !max_step.is_finite() {
            break;
        }
        last_step = max_step;
        let g = grad_norm(design, w, lambda, &x);
        if max_step < cfg.tolerance || g < cfg.tolerance {
            return Ok(FitOutcome {
                params: x,
                iterations: it,
                grad_norm: g,
            });
        }
    }
    let max_abs_param = x.s.iter().chain(&x.d).fold(0.0f64, |a, v| a.max(v.abs()));
    Err(FitError::NotConverged {
        iterations: cfg.max_iterations,
        grad_norm: grad_norm(design, w, lambda, &x),
        last_step,
        max_abs_param,
    })
}

/// Fits abilities and difficulties to `outcomes` by regularized maximum likelihood.
pub fn fit(outcomes: &OutcomeMatrix, cfg: &FitConfig) -> Result<RaschFit, FitError> {
    let design = Design::new(outcomes);
    let out = fit_design(&design, None, cfg, None)?;
    Ok(RaschFit {
        abilities: design.solvers.iter().cloned().zip(out.params.s).collect(),
        difficulties: design.problems.iter().cloned().zip(out.params.d).collect(),
        lambda: cfg.lambda,
        converged: true,
        iterations: out.iterations,
        final_grad_norm: out.grad_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rasch::{gradient, log_likelihood};
    use crate::testutil::matrix_from;

    fn id(s: &str) -> ModelId {
        ModelId::new(s).unwrap()
    }

    /// Four solvers of increasing skill over six problems, no separation.
    fn ladder() -> OutcomeMatrix {
        let rows: [(&str, [bool; 6]); 4] = [
            ("m1", [true, false, false, false, true, false]),
            ("m2", [true, true, false, false, false, true]),
            ("m3", [true, true, true, false, false, true]),
            ("m4", [true, true, true, true, false, false]),
        ];
        let mut entries = Vec::new();
        for (m, ys) in rows {
            for (j, y) in ys.iter().enumerate() {
                entries.push((m, format!("p{j}"), "auth", *y));
            }
        }
        let borrowed: Vec<_> = entries.iter().map(|(m, p, a, y)| (*m, p.as_str(), *a, *y)).collect();
        matrix_from(&borrowed)
    }

    #[test]
    fn converges_with_small_gradient() {
        let o = ladder();
        let f = fit(&o, &FitConfig::default()).unwrap();
        assert!(f.converged);
        assert!(f.final_grad_norm < 1e-8);
        assert!(gradient(&f, &o).inf_norm() < 1e-8);
        assert!(f.abilities[&id("m4")] > f.abilities[&id("m1")]);
    }

    #[test]
    fn stationary_point_is_a_maximum() {
        let o = ladder();
        let f = fit(&o, &FitConfig::default()).unwrap();
        let base = log_likelihood(&f, &o);
        for (k, _) in f.abilities.clone() {
            for eps in [-1e-3, 1e-3] {
                let mut g = f.clone();
                *g.abilities.get_mut(&k).unwrap() += eps;
                assert!(log_likelihood(&g, &o) < base);
            }
        }
    }

    #[test]
    fn identical_rows_give_equal_abilities() {
        let o = matrix_from(&[
            ("a", "p", "z", true),
            ("a", "q", "z", false),
            ("b", "p", "z", true),
            ("b", "q", "z", false),
            ("c", "p", "z", false),
            ("c", "q", "z", true),
        ]);
        let f = fit(&o, &FitConfig::default()).unwrap();
        assert!((f.abilities[&id("a")] - f.abilities[&id("b")]).abs() < 1e-9);
    }

    #[test]
    fn lambda_zero_with_unanimous_problem_diverges() {
        let o = matrix_from(&[
            ("a", "p", "z", true),
            ("b", "p", "z", true),
            ("a", "q", "z", false),
            ("b", "q", "z", true),
            ("a", "r", "z", true),
            ("b", "r", "z", false),
        ]);
        let cfg = FitConfig {
            lambda: 0.0,
            ..FitConfig::default()
        };
        assert_eq!(
            fit(&o, &cfg).unwrap_err(),
            FitError::DivergentProblem {
                problem: ProblemId::new("p"),
                all_correct: true
            }
        );
        let f = fit(&o, &FitConfig::default()).unwrap();
        assert!(f.difficulties.values().all(|d| d.is_finite()));
    }

    #[test]
    fn perfect_solver_is_named() {
        let o = matrix_from(&[("a", "p", "z", true), ("a", "q", "z", true), ("b", "p", "z", false), ("b", "q", "z", true)]);
        assert!(matches!(
            fit(&o, &FitConfig::default()),
            Err(FitError::DivergentSolver { solver, all_correct: true }) if solver == id("a")
        ));
    }

    #[test]
    fn empty_and_bad_config() {
        assert_eq!(fit(&OutcomeMatrix::new(), &FitConfig::default()).unwrap_err(), FitError::Empty);
        let cfg = FitConfig {
            lambda: -1.0,
            ..FitConfig::default()
        };
        assert!(matches!(fit(&ladder(), &cfg), Err(FitError::Config(_))));
    }

    #[test]
    fn iteration_budget_exhaustion_reports_diagnostics() {
        let cfg = FitConfig {
            max_iterations: 2,
            ..FitConfig::default()
        };
        match fit(&ladder(), &cfg).unwrap_err() {
            FitError::NotConverged { iterations, grad_norm, .. } => {
                assert_eq!(iterations, 2);
                assert!(grad_norm > 0.0);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn integer_weights_equal_duplicated_problems() {
        let o = ladder();
        let design = Design::new(&o);
        let w = [2.0, 1.0, 0.0, 3.0, 1.0, 1.0];
        let weighted = fit_design(&design, Some(&w), &FitConfig::default(), None).unwrap();

        // Materialize the copies as distinct problems.
        let mut dup = OutcomeMatrix::new();
        for (m, p, y) in o.iter() {
            let j: usize = p.as_str()[1..].parse().unwrap();
            for c in 0..w[j] as usize {
                dup.insert(m.clone(), ProblemId::new(format!("{p}#{c}")), id("auth"), y).unwrap();
            }
        }
        let expanded = fit(&dup, &FitConfig::default()).unwrap();
        for (i, m) in design.solvers.iter().enumerate() {
            assert!((weighted.params.s[i] - expanded.abilities[m]).abs() < 1e-7);
        }
        assert!((weighted.params.d[0] - expanded.difficulties[&ProblemId::new("p0#1")]).abs() < 1e-7);
    }
}
