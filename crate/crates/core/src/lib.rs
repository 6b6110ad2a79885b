//! Schema-guided task-oriented dialog harness.
//!
//! * [`schema`] and [`corpus`] read SGD-format schema and dialogue files.
//! * [`model`] holds dialog states, acts and database results.
//! * [`serializer`] turns a turn into a state-summarized context and a
//!   cascaded target, parses generations back, and builds training records.
//! * [`backends`] are text-in/text-out generators: gold replay, a schema
//!   driven rule agent and a remote client for external model processes.
//! * [`simulator`] runs goal-driven users against a backend.
//! * [`metrics`] scores predictions and aggregates reports.
//! * [`eval`] drives a backend over a corpus and collects frame evaluations.

pub mod backends;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod model;
pub mod schema;
pub mod serializer;
pub mod simulator;
pub mod utterance;
pub mod variants;

pub use corpus::{Dialogue, DomainSplit, Frame, SplitTag, Turn};
pub use error::CorpusError;
pub use model::{ActionFrame, ActiveIntent, DbResults, DialogAct, DialogState, SlotRef, Speaker};
pub use schema::{DomainSchema, IntentDef, SlotDef};
