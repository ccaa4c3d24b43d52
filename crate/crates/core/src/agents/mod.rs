//! Participants: remote chat endpoints and synthetic agents with known
//! latent parameters.

mod endpoint;
mod stub;
mod synthetic;

use std::sync::Arc;

use thiserror::Error;

use crate::types::{DomainTag, ModelId, ProblemId};

pub use endpoint::{EndpointAgent, EndpointConfig};
pub use stub::{StubReply, StubServer};
pub use synthetic::{SyntheticAgent, SyntheticParams, SyntheticItem};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum AgentError {
    #[error("agent configuration error: {0}")]
    Config(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {status}: {body}")]
    Endpoint { status: u16, body: String },
    #[error("malformed agent response: {0}")]
    Protocol(String),
}

/// What the caller is asking for. Endpoint agents only see the rendered
/// prompt; synthetic agents act on the structured task.
#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    MetaPrompt {
        domain: DomainTag,
    },
    Generate {
        domain: DomainTag,
        slot: usize,
    },
    Amplify {
        domain: DomainTag,
        slot: usize,
        round: usize,
        statement: String,
        gold: String,
    },
    Solve {
        problem: ProblemId,
        statement: String,
        latent_difficulty: Option<f64>,
    },
    Verify {
        problem: ProblemId,
        statement: String,
        gold: String,
        candidates: Vec<String>,
        sample: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Request {
    pub prompt: String,
    pub task: Task,
    /// 0 for the first ask, 1 for a format re-ask.
    pub attempt: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reply {
    pub text: String,
    /// Ground-truth difficulty of an authored item, synthetic agents only.
    pub latent_difficulty: Option<f64>,
}

impl Reply {
    pub fn text(text: impl Into<String>) -> Self {
        Reply {
            text: text.into(),
            latent_difficulty: None,
        }
    }
}

pub trait Agent: Send + Sync {
    fn name(&self) -> &ModelId;
    fn respond(&self, request: &Request) -> Result<Reply, AgentError>;
}

pub type AgentHandle = Arc<dyn Agent>;

/// Agent backed by a closure; used for scripted fixtures.
pub struct FnAgent<F> {
    name: ModelId,
    f: F,
}

impl<F> FnAgent<F>
where
    F: Fn(&Request) -> Result<Reply, AgentError> + Send + Sync,
{
    pub fn new(name: ModelId, f: F) -> Self {
        FnAgent { name, f }
    }
}

impl<F> Agent for FnAgent<F>
where
    F: Fn(&Request) -> Result<Reply, AgentError> + Send + Sync,
{
    fn name(&self) -> &ModelId {
        &self.name
    }

    fn respond(&self, request: &Request) -> Result<Reply, AgentError> {
        (self.f)(request)
    }
}
