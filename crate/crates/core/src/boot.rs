//! Author-stratified bootstrap intervals and worst-case rank ranges.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::outcome::OutcomeMatrix;
use crate::rasch::{fit_design, rate_design, Design, FitConfig, FitError, Weights};
use crate::stats::quantile_sorted;
use crate::types::{ModelId, Problem, ProblemId};

/// Fraction of failed resamples tolerated before the bootstrap is abandoned.
const MAX_DROP_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    #[default]
    Author,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub iterations: usize,
    /// Tail mass on each side.
    pub alpha: f64,
    pub seed: u64,
    #[serde(default)]
    pub stratify_by: Stratum,
}

impl BootstrapSpec {
    pub fn new(iterations: usize, alpha: f64, seed: u64) -> Self {
        BootstrapSpec {
            iterations,
            alpha,
            seed,
            stratify_by: Stratum::Author,
        }
    }

    fn validate(&self) -> Result<(), BootstrapError> {
        if self.iterations == 0 {
            return Err(BootstrapError::Config("bootstrap needs at least one resample".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(BootstrapError::Config(format!("alpha must lie in (0, 0.5), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// The ranking settings a refit needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RankConfig {
    pub fit: FitConfig,
    pub anchor: ModelId,
    pub anchor_rating: f64,
    pub weights: Weights,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Solve,
    Author,
    Composite,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Solve, Axis::Author, Axis::Composite];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub model: ModelId,
    pub axis: Axis,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankRange {
    pub best: usize,
    pub worst: usize,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum BootstrapError {
    #[error("invalid bootstrap configuration: {0}")]
    Config(String),
    #[error("fit on the full data failed: {0}")]
    FullFit(FitError),
    #[error("{dropped} of {iterations} resamples failed to fit (more than 1%)")]
    TooManyFailures { dropped: usize, iterations: usize },
    #[error("outcome matrix references problem {0} absent from the problem list")]
    UnknownProblem(ProblemId),
}

/// Per-author pools of design indices, authors in sorted order.
fn strata(author_of: &[usize], n_authors: usize) -> Vec<Vec<usize>> {
    let mut pools = vec![Vec::new(); n_authors];
    for (p, &a) in author_of.iter().enumerate() {
        pools[a].push(p);
    }
    pools
}

/// Draws `|pool|` members of each pool uniformly with replacement.
fn draw<'a>(pools: &'a [Vec<usize>], rng: &'a mut impl Rng) -> impl Iterator<Item = usize> + 'a {
    pools
        .iter()
        .flat_map(move |pool| (0..pool.len()).map(|_| pool[rng.random_range(0..pool.len())]).collect::<Vec<_>>())
}

/// Generator for resample `index`: an independent ChaCha stream of `seed`.
fn resample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// One stratified resample: for every author, as many draws with replacement
/// from that author's valid problems as the author has. Authors appear in
/// sorted order.
pub fn stratified_resample<'a>(problems: &'a [Problem], rng: &mut impl Rng) -> Vec<&'a Problem> {
    let valid: Vec<&Problem> = problems.iter().filter(|p| p.is_valid()).collect();
    let mut authors: Vec<&ModelId> = valid.iter().map(|p| &p.author).collect();
    authors.sort();
    authors.dedup();
    let author_of: Vec<usize> = valid
        .iter()
        .map(|p| authors.binary_search(&&p.author).expect("author listed"))
        .collect();
    let pools = strata(&author_of, authors.len());
    draw(&pools, rng).map(|i| valid[i]).collect()
}

fn resample_weights(pools: &[Vec<usize>], n: usize, seed: u64, index: usize) -> Vec<f64> {
    let mut rng = resample_rng(seed, index);
    let mut w = vec![0.0; n];
    for p in draw(pools, &mut rng) {
        w[p] += 1.0;
    }
    w
}

/// Percentile intervals on the solve, author and composite axes.
///
/// Each resample refits the model with problem multiplicities from a
/// stratified draw; the refit starts from the full-data estimate.
pub fn bootstrap_ci(
    outcomes: &OutcomeMatrix,
    problems: &[Problem],
    spec: &BootstrapSpec,
    rank: &RankConfig,
) -> Result<Vec<IntervalRow>, BootstrapError> {
    spec.validate()?;
    rank.weights
        .validate()
        .map_err(|e| BootstrapError::Config(e.to_string()))?;
    let design = Design::new(outcomes);
    let anchor = design
        .solvers
        .binary_search(&rank.anchor)
        .map_err(|_| BootstrapError::Config(format!("anchor model {} is not a fitted solver", rank.anchor)))?;
    let by_id: HashMap<&ProblemId, &Problem> = problems.iter().map(|p| (&p.id, p)).collect();
    let gold_correct = design
        .problems
        .iter()
        .map(|id| {
            by_id
                .get(id)
                .map(|p| !p.gold_overridden)
                .ok_or_else(|| BootstrapError::UnknownProblem(id.clone()))
        })
        .collect::<Result<Vec<bool>, _>>()?;

    let full = fit_design(&design, None, &rank.fit, None).map_err(BootstrapError::FullFit)?;
    let ones = vec![1.0; design.n_problems()];
    let point = rate_design(&design, &full.params, &gold_correct, &ones, anchor, rank.anchor_rating, &rank.weights);

    let pools = strata(&design.author_of, design.authors.len());
    let draws: Vec<Option<Vec<[Option<f64>; 3]>>> = (0..spec.iterations)
        .into_par_iter()
        .map(|i| {
            let w = resample_weights(&pools, design.n_problems(), spec.seed, i);
            match fit_design(&design, Some(&w), &rank.fit, Some(&full.params)) {
                Ok(out) => Some(rate_design(&design, &out.params, &gold_correct, &w, anchor, rank.anchor_rating, &rank.weights)),
                Err(e) => {
                    tracing::debug!(resample = i, error = %e, "bootstrap resample dropped");
                    None
                }
            }
        })
        .collect();
    let dropped = draws.iter().filter(|d| d.is_none()).count();
    if dropped as f64 > MAX_DROP_FRACTION * spec.iterations as f64 {
        return Err(BootstrapError::TooManyFailures {
            dropped,
            iterations: spec.iterations,
        });
    }
    if dropped > 0 {
        tracing::warn!(dropped, iterations = spec.iterations, "bootstrap resamples dropped");
    }

    let mut rows = Vec::new();
    for (m, model) in design.solvers.iter().enumerate() {
        for (k, axis) in Axis::ALL.into_iter().enumerate() {
            let Some(point_value) = point[m][k] else { continue };
            let mut values: Vec<f64> = draws.iter().flatten().filter_map(|r| r[m][k]).collect();
            if values.is_empty() {
                continue;
            }
            values.sort_by(f64::total_cmp);
            rows.push(IntervalRow {
                model: model.clone(),
                axis,
                point: point_value,
                lower: quantile_sorted(&values, spec.alpha),
                upper: quantile_sorted(&values, 1.0 - spec.alpha),
            });
        }
    }
    Ok(rows)
}

/// Best and worst attainable rank given composite intervals: a model is
/// certainly behind every model whose lower bound beats its upper bound, and
/// possibly behind every model whose upper bound beats its lower bound.
pub fn rank_ranges(intervals: &[IntervalRow]) -> BTreeMap<ModelId, RankRange> {
    let composite: Vec<&IntervalRow> = intervals.iter().filter(|r| r.axis == Axis::Composite).collect();
    composite
        .iter()
        .map(|m| {
            let others = composite.iter().filter(|j| j.model != m.model);
            let best = 1 + others.clone().filter(|j| j.lower > m.upper).count();
            let worst = 1 + others.filter(|j| j.upper > m.lower).count();
            (m.model.clone(), RankRange { best, worst })
        })
        .collect()
}
