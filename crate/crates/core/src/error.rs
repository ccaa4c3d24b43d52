use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::agents::AgentError;
use crate::answer::{EvalError, JudgeError, ParseError};
use crate::boot::BootstrapError;
use crate::genpipe::GenerationError;
use crate::rasch::FitError;
use crate::store::StoreError;
use crate::verifier::VerifyError;

/// Protocol phase, used to label partial-run failures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Generate,
    Solve,
    Verify,
    Rank,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Generate => "generate",
            Phase::Solve => "solve",
            Phase::Verify => "verify",
            Phase::Rank => "rank",
        })
    }
}

#[derive(Debug, Error)]
pub enum ArenaError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data integrity error: {0}")]
    Integrity(String),

    #[error("{phase} phase failed, state persisted under {}: {source}", checkpoint.display())]
    PhaseFailed {
        phase: Phase,
        checkpoint: PathBuf,
        #[source]
        source: Box<ArenaError>,
    },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error(transparent)]
    Judge(#[from] JudgeError),

    #[error(transparent)]
    Agent(#[from] AgentError),

    #[error(transparent)]
    Generation(#[from] GenerationError),

    #[error(transparent)]
    Verify(#[from] VerifyError),

    #[error(transparent)]
    Fit(#[from] FitError),

    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),

    #[error(transparent)]
    Store(#[from] StoreError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    PhaseFailure,
    DataIntegrity,
}

impl ArenaError {
    pub fn class(&self) -> ErrorClass {
        match self {
            ArenaError::Config(_) => ErrorClass::Config,
            ArenaError::Agent(AgentError::Config(_))
            | ArenaError::Generation(GenerationError::Agent {
                source: AgentError::Config(_),
                ..
            })
            | ArenaError::Generation(GenerationError::Config(_))
            | ArenaError::Verify(VerifyError::Agent {
                source: AgentError::Config(_),
                ..
            })
            | ArenaError::Fit(FitError::Config(_))
            | ArenaError::Bootstrap(BootstrapError::Config(_)) => ErrorClass::Config,
            ArenaError::Verify(VerifyError::Mismatch(_) | VerifyError::ForeignVerdict { .. }) => ErrorClass::DataIntegrity,
            ArenaError::Integrity(_) => ErrorClass::DataIntegrity,
            ArenaError::Store(StoreError::Io { .. }) => ErrorClass::PhaseFailure,
            ArenaError::Store(_) => ErrorClass::DataIntegrity,
            ArenaError::PhaseFailed { source, .. } => match source.class() {
                ErrorClass::Config => ErrorClass::Config,
                ErrorClass::DataIntegrity => ErrorClass::DataIntegrity,
                ErrorClass::PhaseFailure => ErrorClass::PhaseFailure,
            },
            _ => ErrorClass::PhaseFailure,
        }
    }

    pub(crate) fn in_phase(self, phase: Phase, checkpoint: impl Into<PathBuf>) -> ArenaError {
        match self {
            already @ ArenaError::PhaseFailed { .. } => already,
            other => ArenaError::PhaseFailed {
                phase,
                checkpoint: checkpoint.into(),
                source: Box::new(other),
            },
        }
    }
}

pub type Result<T, E = ArenaError> = std::result::Result<T, E>;
