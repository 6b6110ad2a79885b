use std::collections::HashMap;
use std::time::Instant;

use super::{request_id, Backend, BackendError, BackendRequest, BackendResponse};
use crate::corpus::Dialogue;
use crate::eval::gold_turns;

/// Gold replay: answers every request with the serialized gold target of
/// the frame its id names. The context is ignored.
#[derive(Debug, Clone, Default)]
pub struct OracleBackend {
    targets: HashMap<String, String>,
}

impl OracleBackend {
    pub fn from_corpus(dialogues: &[Dialogue]) -> Self {
        let targets = dialogues
            .iter()
            .flat_map(gold_turns)
            .map(|g| (g.id.clone(), g.target().text))
            .collect();
        OracleBackend { targets }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

impl Backend for OracleBackend {
    fn name(&self) -> &str {
        "oracle"
    }

    fn generate(&mut self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let start = Instant::now();
        let text = self
            .targets
            .get(&request.id)
            .cloned()
            .ok_or_else(|| BackendError::NoSuchFrame(request.id.clone()))?;
        Ok(BackendResponse {
            id: request.id.clone(),
            text,
            latency: start.elapsed(),
        })
    }
}

/// Serialized gold target for the `service` frame of the user turn at
/// `turn_index`.
pub fn oracle_generate(gold: &Dialogue, turn_index: usize, service: &str) -> Result<String, BackendError> {
    let id = request_id(&gold.dialogue_id, turn_index, service);
    gold_turns(gold)
        .into_iter()
        .find(|g| g.id == id)
        .map(|g| g.target().text)
        .ok_or(BackendError::NoSuchFrame(id))
}
