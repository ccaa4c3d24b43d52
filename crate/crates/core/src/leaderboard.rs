//! Leaderboard assembly and export.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boot::{Axis, IntervalRow, RankRange};
use crate::rasch::RatingRow;
use crate::store::{write_atomic, StoreError};
use crate::types::ModelId;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub model: ModelId,
    pub solve: f64,
    pub author: Option<f64>,
    pub composite: Option<f64>,
    /// Composite interval.
    pub ci: Option<(f64, f64)>,
    pub range: Option<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Markdown,
}

/// Rows by composite, descending (ties by name); models without a
/// composite follow, by solve rating. A range is widened to include the
/// row's own position when its point estimate falls outside its interval.
pub fn leaderboard_rows(
    ratings: &[RatingRow],
    intervals: &[IntervalRow],
    ranges: &BTreeMap<ModelId, RankRange>,
) -> Vec<LeaderboardRow> {
    let mut sorted: Vec<&RatingRow> = ratings.iter().collect();
    sorted.sort_by(|a, b| match (a.composite, b.composite) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.model.cmp(&b.model)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => b.solve_rating.total_cmp(&a.solve_rating).then_with(|| a.model.cmp(&b.model)),
    });
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let rank = i + 1;
            let ci = intervals
                .iter()
                .find(|iv| iv.model == r.model && iv.axis == Axis::Composite)
                .map(|iv| (iv.lower, iv.upper));
            let range = r.composite.and(ranges.get(&r.model)).map(|g| {
                if g.best > rank || g.worst < rank {
                    tracing::warn!(model = %r.model, rank, best = g.best, worst = g.worst, "point estimate outside its interval, widening range");
                }
                (g.best.min(rank), g.worst.max(rank))
            });
            LeaderboardRow {
                rank,
                model: r.model.clone(),
                solve: r.solve_rating,
                author: r.author_rating,
                composite: r.composite,
                ci,
                range,
            }
        })
        .collect()
}

/// Half-to-even integer rounding for display.
pub fn display(x: f64) -> String {
    format!("{}", x.round_ties_even() as i64)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), display)
}

/// `confidence` is the two-sided level, e.g. 0.95.
pub fn render(rows: &[LeaderboardRow], format: Format, confidence: f64) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(rows).expect("rows serialize");
            s.push('\n');
            s
        }
        Format::Markdown => {
            let level = display(confidence * 100.0);
            let mut s = format!("| # | Model | Solve | Author | Composite | {level}% CI | Range |\n");
            s.push_str("|---:|---|---:|---:|---:|---|---|\n");
            for r in rows {
                let ci = r
                    .ci
                    .map_or_else(|| "-".into(), |(lo, hi)| format!("[{}, {}]", display(lo), display(hi)));
                let range = r.range.map_or_else(|| "-".into(), |(b, w)| format!("{b}\u{2013}{w}"));
                writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    r.rank,
                    r.model,
                    display(r.solve),
                    opt(r.author),
                    opt(r.composite),
                    ci,
                    range
                )
                .expect("write to string");
            }
            s
        }
    }
}

pub fn export_leaderboard(rows: &[LeaderboardRow], format: Format, confidence: f64, path: &Path) -> Result<(), StoreError> {
    write_atomic(path, render(rows, format, confidence).as_bytes())
}
