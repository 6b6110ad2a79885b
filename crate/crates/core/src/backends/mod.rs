//! Generation backends.
//!
//! Every backend maps a serialized context to raw text. The harness parses
//! that text with [`crate::serializer::parse_generation`], so a backend is
//! free to return anything.

mod oracle;
mod remote;
mod rule;

use std::time::Duration;

use thiserror::Error;

pub use oracle::{oracle_generate, OracleBackend};
pub use remote::{Endpoint, RemoteBackend, DEFAULT_TIMEOUT};
pub use rule::{rule_agent_step, track_state, RuleAgent};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendRequest {
    /// Unique within a session; see [`request_id`].
    pub id: String,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendResponse {
    pub id: String,
    pub text: String,
    pub latency: Duration,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("request {id} timed out after {after:?}")]
    Timeout { id: String, after: Duration },
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("backend failed on {id}: {message}")]
    Remote { id: String, message: String },
    #[error("no gold frame for request {0}")]
    NoSuchFrame(String),
    #[error("unreadable context: {0}")]
    InvalidContext(String),
}

/// The text-in, text-out contract.
pub trait Backend: Send {
    fn name(&self) -> &str;

    /// Called before the first request of each dialogue. Stateless backends
    /// ignore it.
    fn begin_dialogue(&mut self, _dialogue_id: &str) {}

    fn generate(&mut self, request: &BackendRequest) -> Result<BackendResponse, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn begin_dialogue(&mut self, dialogue_id: &str) {
        (**self).begin_dialogue(dialogue_id)
    }

    fn generate(&mut self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        (**self).generate(request)
    }
}

/// Correlation id of the request for one service frame of a user turn.
pub fn request_id(dialogue_id: &str, turn_index: usize, service: &str) -> String {
    format!("{dialogue_id}/{turn_index}/{service}")
}
