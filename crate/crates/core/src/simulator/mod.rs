//! Goal-driven user simulation against an in-memory database.
//!
//! Everything here is driven by declaration order and seeded RNGs, never by
//! slot or intent names, so a schema and its renamed variant produce the
//! same goals, databases and dialogues up to the names themselves.

mod db;
mod run;
mod user;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::backends::BackendError;
use crate::schema::{DomainSchema, IntentDef, SlotDef};

pub use db::{SyntheticDb, DEFAULT_RECORDS_PER_DOMAIN};
pub use run::{
    corpus_digest, run_dialog, synth_corpus, system_turn, training_records, Outcome, SimulatedDialog, SynthCorpus,
    SystemTurn, DEFAULT_MAX_TURNS,
};
pub use user::{UserSimulator, UserTurn};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimulatorError {
    #[error("schema `{0}` has no intents")]
    EmptySchema(String),
    #[error("no schemas to simulate")]
    NoSchemas,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// What a simulated user wants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserGoal {
    pub service: String,
    pub intent: String,
    /// Constraints in reveal order: required slots, then optional ones.
    pub constraints: Vec<(String, String)>,
    /// Result slots to ask about once an offer is accepted.
    pub requested: Vec<String>,
    /// Offers the user may reject before accepting whatever comes.
    pub patience: usize,
}

impl UserGoal {
    pub fn constraint(&self, slot: &str) -> Option<&str> {
        self.constraints
            .iter()
            .find(|(s, _)| s == slot)
            .map(|(_, v)| v.as_str())
    }
}

const WORDS: [&str; 40] = [
    "amber", "birch", "cedar", "delta", "ember", "fjord", "grove", "harbor", "iris", "juniper", "kestrel", "lagoon",
    "maple", "nectar", "onyx", "pebble", "quartz", "raven", "sierra", "tundra", "umber", "violet", "willow", "xenon",
    "yarrow", "zephyr", "alder", "basil", "comet", "dune", "elm", "flint", "garnet", "hazel", "indigo", "jasper",
    "kelp", "lotus", "meadow", "nimbus",
];

/// Values a non-categorical slot can take: four words picked by the slot's
/// position in its schema.
pub fn free_value_pool(position: usize) -> [&'static str; 4] {
    std::array::from_fn(|k| WORDS[(4 * position + k) % WORDS.len()])
}

pub(crate) fn draw_value(rng: &mut ChaCha8Rng, schema: &DomainSchema, slot: &str) -> String {
    let position = schema.slot_index(slot).unwrap_or(0);
    match schema.slot(slot) {
        Some(SlotDef {
            is_categorical: true,
            possible_values,
            ..
        }) if !possible_values.is_empty() => possible_values.choose(rng).expect("non-empty").clone(),
        _ => free_value_pool(position).choose(rng).expect("non-empty").to_string(),
    }
}

/// Result slots that cannot be constrained, which are worth requesting.
fn requestable(intent: &IntentDef) -> Vec<&str> {
    intent
        .result_slots
        .iter()
        .map(String::as_str)
        .filter(|s| !intent.constrainable_slots().any(|c| c == *s))
        .collect()
}

fn pick_intent<'a>(schema: &'a DomainSchema, rng: &mut ChaCha8Rng) -> Result<&'a IntentDef, SimulatorError> {
    schema
        .intents
        .choose(rng)
        .ok_or_else(|| SimulatorError::EmptySchema(schema.service_name.clone()))
}

fn finish_goal(
    schema: &DomainSchema,
    intent: &IntentDef,
    rng: &mut ChaCha8Rng,
    mut value_of: impl FnMut(&mut ChaCha8Rng, &str) -> String,
) -> UserGoal {
    let mut constraints: Vec<(String, String)> = intent
        .required_slots
        .iter()
        .map(|s| (s.clone(), value_of(rng, s)))
        .collect();
    for slot in intent.optional_slots.keys() {
        if rng.gen_bool(0.5) {
            constraints.push((slot.clone(), value_of(rng, slot)));
        }
    }
    let requested = requestable(intent)
        .into_iter()
        .filter(|_| rng.gen_bool(0.5))
        .map(str::to_string)
        .collect();
    UserGoal {
        service: schema.service_name.clone(),
        intent: intent.name.clone(),
        patience: constraints.len(),
        constraints,
        requested,
    }
}

/// A goal drawn from the schema alone. It need not be satisfiable by any
/// database.
pub fn sample_goal(schema: &DomainSchema, seed: u64) -> Result<UserGoal, SimulatorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let intent = pick_intent(schema, &mut rng)?;
    Ok(finish_goal(schema, intent, &mut rng, |rng, slot| {
        draw_value(rng, schema, slot)
    }))
}

/// A goal whose constraints are copied from one database record, so at
/// least that record satisfies it.
pub fn sample_satisfiable_goal(schema: &DomainSchema, db: &SyntheticDb, seed: u64) -> Result<UserGoal, SimulatorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let intent = pick_intent(schema, &mut rng)?;
    let records = db.records(&schema.service_name);
    if records.is_empty() {
        return Ok(finish_goal(schema, intent, &mut rng, |rng, slot| {
            draw_value(rng, schema, slot)
        }));
    }
    let anchor = records[rng.gen_range(0..records.len())].clone();
    Ok(finish_goal(schema, intent, &mut rng, |rng, slot| {
        anchor
            .get(slot)
            .cloned()
            .unwrap_or_else(|| draw_value(rng, schema, slot))
    }))
}
