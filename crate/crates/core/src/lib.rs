//! Self-play arena: models author problems, solve each other's problems,
//! pass verification, and are ranked by a jointly fitted Rasch model with
//! stratified bootstrap intervals.

pub mod agents;
pub mod answer;
pub mod boot;
pub mod error;
pub mod genpipe;
pub mod leaderboard;
pub mod manifest;
pub mod outcome;
pub mod prompts;
pub mod rasch;
pub mod round;
pub mod schedule;
pub mod stats;
pub mod store;
pub mod types;
pub mod verifier;

#[cfg(test)]
mod testutil;

pub use boot::{bootstrap_ci, rank_ranges, stratified_resample, Axis, BootstrapSpec, IntervalRow, RankConfig, RankRange};
pub use error::{ArenaError, ErrorClass, Phase, Result};
pub use leaderboard::{export_leaderboard, leaderboard_rows, Format, LeaderboardRow};
pub use manifest::{Binding, EndpointBinding, ModelSpec, RunManifest};
pub use outcome::{build_outcome_matrix, OutcomeMatrix};
pub use rasch::{fit, predict, FitConfig, RaschFit, RatingRow, Weights};
pub use round::{rank, run_round, simulate, Arena, RunReport};
pub use schedule::plan_domain_schedule;
pub use store::RunStore;
pub use types::{taxonomy, BroadArea, DomainTag, ModelId, Problem, ProblemId, RecordFlag, Role, SolveRecord, Validity};
