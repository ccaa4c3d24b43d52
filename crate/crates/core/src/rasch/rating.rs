//! Conversion of logits to rating points, capped author ratings, composites.

use std::collections::BTreeMap;
use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use super::fit::{Design, Params};
use super::RaschFit;
use crate::error::{ArenaError, Result};
use crate::types::{ModelId, Problem};

/// Rating points per logit: a 400-point gap is 10:1 odds.
pub const C_ELO: f64 = 400.0 / LN_10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EloScale {
    pub c_elo: f64,
    pub anchor_rating: f64,
    pub anchor_ability: f64,
}

impl EloScale {
    pub fn new(fit: &RaschFit, anchor: &ModelId, anchor_rating: f64) -> Result<Self> {
        let anchor_ability = *fit
            .abilities
            .get(anchor)
            .ok_or_else(|| ArenaError::Config(format!("anchor model {anchor} has no fitted ability")))?;
        Ok(EloScale {
            c_elo: C_ELO,
            anchor_rating,
            anchor_ability,
        })
    }

    /// Maps a logit (ability or difficulty) to rating points.
    pub fn rating(&self, logit: f64) -> f64 {
        self.anchor_rating + self.c_elo * (logit - self.anchor_ability)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w_solve: f64,
    pub w_author: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            w_solve: 0.5,
            w_author: 0.5,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.w_solve) || !ok(self.w_author) || (self.w_solve + self.w_author - 1.0).abs() > 1e-9 {
            return Err(ArenaError::Config(format!(
                "weights must be nonnegative and sum to 1, got ({}, {})",
                self.w_solve, self.w_author
            )));
        }
        Ok(())
    }
}

pub fn to_solver_rating(fit: &RaschFit, scale: &EloScale) -> BTreeMap<ModelId, f64> {
    fit.abilities.iter().map(|(m, s)| (m.clone(), scale.rating(*s))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuthorRating {
    pub rating: f64,
    pub problems_authored_valid: usize,
    pub gold_correct_count: usize,
}

/// Weighted mean capped difficulty. Items are `(d, gold_correct, weight)`.
/// Gold-incorrect items enter at `min(d, mean gold-correct d)`, or at
/// `min(d, fallback)` when the author has no gold-correct item.
fn capped_mean(items: &[(f64, bool, f64)], fallback: f64) -> Option<f64> {
    let total: f64 = items.iter().map(|i| i.2).sum();
    if total == 0.0 {
        return None;
    }
    let correct_w: f64 = items.iter().filter(|i| i.1).map(|i| i.2).sum();
    let cap = if correct_w > 0.0 {
        items.iter().filter(|i| i.1).map(|i| i.0 * i.2).sum::<f64>() / correct_w
    } else {
        fallback
    };
    let sum: f64 = items
        .iter()
        .map(|&(d, correct, w)| w * if correct { d } else { d.min(cap) })
        .sum();
    Some(sum / total)
}

/// Mean rating-scaled difficulty of `author`'s valid problems, with
/// overridden-gold problems capped at the author's gold-correct mean.
/// `None` when the author has no valid problem in the fit.
pub fn author_rating(fit: &RaschFit, problems: &[Problem], author: &ModelId, scale: &EloScale) -> Option<AuthorRating> {
    let items: Vec<(f64, bool, f64)> = problems
        .iter()
        .filter(|p| p.author == *author && p.is_valid())
        .filter_map(|p| fit.difficulties.get(&p.id).map(|d| (*d, !p.gold_overridden, 1.0)))
        .collect();
    let all: Vec<f64> = problems
        .iter()
        .filter(|p| p.is_valid())
        .filter_map(|p| fit.difficulties.get(&p.id).copied())
        .collect();
    let fallback = all.iter().sum::<f64>() / all.len().max(1) as f64;
    let mean = capped_mean(&items, fallback)?;
    Some(AuthorRating {
        rating: scale.rating(mean),
        problems_authored_valid: items.len(),
        gold_correct_count: items.iter().filter(|i| i.1).count(),
    })
}

/// `w_solve·solve + w_author·author`; absent when the author axis is.
pub fn composite(solve: f64, author: Option<f64>, weights: &Weights) -> Option<f64> {
    author.map(|a| weights.w_solve * solve + weights.w_author * a)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatingRow {
    pub model: ModelId,
    pub solve_rating: f64,
    pub author_rating: Option<f64>,
    pub composite: Option<f64>,
    pub problems_authored_valid: usize,
    pub gold_correct_count: usize,
}

/// One row per fitted solver, in model order.
pub fn rate(fit: &RaschFit, problems: &[Problem], scale: &EloScale, weights: &Weights) -> Vec<RatingRow> {
    fit.abilities
        .iter()
        .map(|(m, s)| {
            let solve = scale.rating(*s);
            let author = author_rating(fit, problems, m, scale);
            RatingRow {
                model: m.clone(),
                solve_rating: solve,
                author_rating: author.map(|a| a.rating),
                composite: composite(solve, author.map(|a| a.rating), weights),
                problems_authored_valid: author.map_or(0, |a| a.problems_authored_valid),
                gold_correct_count: author.map_or(0, |a| a.gold_correct_count),
            }
        })
        .collect()
}

/// Solve, author and composite ratings for each solver of `design`, with
/// problem multiplicities `w` (a resample). Same arithmetic as [`rate`].
pub(crate) fn rate_design(
    design: &Design,
    x: &Params,
    gold_correct: &[bool],
    w: &[f64],
    anchor: usize,
    anchor_rating: f64,
    weights: &Weights,
) -> Vec<[Option<f64>; 3]> {
    let scale = EloScale {
        c_elo: C_ELO,
        anchor_rating,
        anchor_ability: x.s[anchor],
    };
    let mut per_author: Vec<Vec<(f64, bool, f64)>> = vec![Vec::new(); design.authors.len()];
    let (mut all_sum, mut all_w) = (0.0, 0.0);
    for p in 0..design.n_problems() {
        if w[p] > 0.0 {
            per_author[design.author_of[p]].push((x.d[p], gold_correct[p], w[p]));
            all_sum += w[p] * x.d[p];
            all_w += w[p];
        }
    }
    let fallback = if all_w > 0.0 { all_sum / all_w } else { 0.0 };
    design
        .solvers
        .iter()
        .enumerate()
        .map(|(m, id)| {
            let solve = scale.rating(x.s[m]);
            let author = design
                .authors
                .binary_search(id)
                .ok()
                .and_then(|a| capped_mean(&per_author[a], fallback))
                .map(|d| scale.rating(d));
            [Some(solve), author, composite(solve, author, weights)]
        })
        .collect()
}
