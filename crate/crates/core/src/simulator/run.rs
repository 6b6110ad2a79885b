use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::{
    sample_satisfiable_goal, SimulatorError, SyntheticDb, UserGoal, UserSimulator, DEFAULT_RECORDS_PER_DOMAIN,
};
use crate::backends::{request_id, Backend, BackendError, BackendRequest, RuleAgent};
use crate::corpus::{dialogues_to_json, Dialogue, Frame, ServiceCall, Turn};
use crate::model::{act, ActionFrame, DbResults, DialogState, Speaker};
use crate::schema::DomainSchema;
use crate::serializer::{
    build_context, build_target, build_training_record, parse_generation, ContextString, ParsedTurnOutput,
    TrainingRecord,
};

pub const DEFAULT_MAX_TURNS: usize = 30;

/// How a simulated dialogue ended, judged by the system's last NOTIFY act.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Failure,
    /// The system never notified.
    Unfinished,
}

#[derive(Debug, Clone)]
pub struct SimulatedDialog {
    /// User turns carry the simulator's gold annotations; system turns carry
    /// what the backend produced.
    pub dialogue: Dialogue,
    /// Backend output per exchange, parsed.
    pub predictions: Vec<ParsedTurnOutput>,
    /// The context each prediction was generated from.
    pub contexts: Vec<ContextString>,
    pub outcome: Outcome,
    /// Whether the system said GOODBYE before `max_turns` ran out.
    pub said_goodbye: bool,
}

impl SimulatedDialog {
    pub fn exchanges(&self) -> usize {
        self.predictions.len()
    }

    /// Action types of every system turn, in order.
    pub fn system_act_types(&self) -> Vec<Vec<String>> {
        self.predictions
            .iter()
            .map(|p| p.system_actions.acts.iter().map(|a| a.act.clone()).collect())
            .collect()
    }
}

fn ready_to_query(state: &DialogState, schema: &DomainSchema) -> bool {
    let Some(intent) = state.active_intent.name().and_then(|n| schema.intent(n)) else {
        return false;
    };
    let filled = state.domain_values(&schema.service_name);
    intent.required_slots.iter().all(|s| filled.contains_key(s.as_str()))
}

/// One system turn of a closed loop.
#[derive(Debug, Clone)]
pub struct SystemTurn {
    pub parsed: ParsedTurnOutput,
    /// The context of the final pass.
    pub context: ContextString,
    /// The query made between the passes, if any.
    pub call: Option<(ServiceCall, DbResults)>,
}

/// Asks `backend` once without database results; if the predicted state has
/// every required slot of the active intent and `db` is given, queries it
/// with that state and asks again, under `id` suffixed with `#db`.
pub fn system_turn<B: Backend + ?Sized>(
    backend: &mut B,
    id: &str,
    prev: &DialogState,
    utterance: &str,
    schema: &DomainSchema,
    db: Option<&SyntheticDb>,
) -> Result<SystemTurn, BackendError> {
    let schemas = std::slice::from_ref(schema);
    let service = schema.service_name.as_str();
    let action_types = act::system_act_types();
    let context = build_context(prev, utterance, schemas, None, &action_types);
    let first = backend.generate(&BackendRequest {
        id: id.to_string(),
        context: context.text.clone(),
    })?;
    let parsed = parse_generation(&first.text, schemas);
    let Some(db) = db.filter(|_| ready_to_query(&parsed.state, schema)) else {
        return Ok(SystemTurn {
            parsed,
            context,
            call: None,
        });
    };
    let parameters = query_parameters(&parsed.state, service);
    let results = db.query(service, &parsed.state);
    let context = build_context(prev, utterance, schemas, Some(&results), &action_types);
    let second = backend.generate(&BackendRequest {
        id: format!("{id}#db"),
        context: context.text.clone(),
    })?;
    Ok(SystemTurn {
        parsed: parse_generation(&second.text, schemas),
        context,
        call: Some((
            ServiceCall {
                method: results.query_intent.clone(),
                parameters,
            },
            results,
        )),
    })
}

/// Runs a closed loop between a [`UserSimulator`] and `backend`.
///
/// Each exchange is a [`system_turn`] against `db`. The dialogue ends when the system says GOODBYE or after
/// `max_turns` exchanges.
pub fn run_dialog<B: Backend + ?Sized>(
    dialogue_id: &str,
    schema: &DomainSchema,
    goal: &UserGoal,
    backend: &mut B,
    db: &SyntheticDb,
    max_turns: usize,
) -> Result<SimulatedDialog, SimulatorError> {
    let service = schema.service_name.as_str();
    let mut user = UserSimulator::new(goal.clone());
    let mut turns = Vec::new();
    let mut predictions = Vec::new();
    let mut contexts = Vec::new();
    let mut last_system: Option<ActionFrame> = None;
    let mut predicted = DialogState::new();
    let mut outcome = Outcome::Unfinished;
    let mut said_goodbye = false;
    backend.begin_dialogue(dialogue_id);

    for _ in 0..max_turns {
        let ut = user.step(last_system.as_ref());
        let id = request_id(dialogue_id, turns.len(), service);
        let turn = system_turn(backend, &id, &predicted, &ut.utterance, schema, Some(db))?;
        let SystemTurn { parsed, context, call } = turn;
        let mut user_frame = Frame::new(service);
        user_frame.state = Some(ut.state);
        user_frame.actions = ut.actions.acts;
        turns.push(Turn {
            speaker: Speaker::User,
            utterance: ut.utterance,
            frames: vec![user_frame],
        });
        let mut system_frame = Frame::new(service);
        system_frame.actions = parsed.system_actions.acts.clone();
        if let Some((c, results)) = call {
            system_frame.service_call = Some(c);
            system_frame.service_results = Some(results.records);
        }
        turns.push(Turn {
            speaker: Speaker::System,
            utterance: parsed.response.clone(),
            frames: vec![system_frame],
        });

        let sys = &parsed.system_actions;
        if outcome == Outcome::Unfinished {
            if sys.contains(act::NOTIFY_SUCCESS) {
                outcome = Outcome::Success;
            } else if sys.contains(act::NOTIFY_FAILURE) {
                outcome = Outcome::Failure;
            }
        }
        said_goodbye = sys.contains(act::GOODBYE);
        predicted = parsed.state.clone();
        last_system = Some(parsed.system_actions.clone());
        contexts.push(context);
        predictions.push(parsed);
        if said_goodbye {
            break;
        }
    }

    Ok(SimulatedDialog {
        dialogue: Dialogue {
            dialogue_id: dialogue_id.to_string(),
            services: vec![service.to_string()],
            turns,
        },
        predictions,
        contexts,
        outcome,
        said_goodbye,
    })
}

/// First value of each constraint the query used.
fn query_parameters(state: &DialogState, service: &str) -> BTreeMap<String, String> {
    state
        .domain_values(service)
        .into_iter()
        .filter_map(|(slot, values)| Some((slot.to_string(), values.first()?.clone())))
        .collect()
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub dialogues: Vec<Dialogue>,
    pub records: Vec<TrainingRecord>,
    pub simulated: Vec<SimulatedDialog>,
    pub db: SyntheticDb,
}

/// `n` rule-agent dialogues over `schemas`, round-robin by service, with one
/// training record per exchange. Fully determined by the arguments.
pub fn synth_corpus(schemas: &[DomainSchema], n: usize, seed: u64) -> Result<SynthCorpus, SimulatorError> {
    let db = SyntheticDb::generate(schemas, seed, DEFAULT_RECORDS_PER_DOMAIN);
    if n > 0 && schemas.is_empty() {
        return Err(SimulatorError::NoSchemas);
    }
    let mut simulated = Vec::with_capacity(n);
    for i in 0..n {
        let schema = &schemas[i % schemas.len()];
        let goal_seed = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let goal = sample_satisfiable_goal(schema, &db, goal_seed)?;
        let id = format!("synth_{seed}_{i:05}");
        simulated.push(run_dialog(
            &id,
            schema,
            &goal,
            &mut RuleAgent::new(),
            &db,
            super::DEFAULT_MAX_TURNS,
        )?);
    }
    let records = simulated.iter().flat_map(training_records).collect();
    Ok(SynthCorpus {
        dialogues: simulated.iter().map(|s| s.dialogue.clone()).collect(),
        records,
        simulated,
        db,
    })
}

/// Training records of a simulated dialogue: the context actually used and
/// a target of gold user side plus the system side the backend produced.
pub fn training_records(sim: &SimulatedDialog) -> Vec<TrainingRecord> {
    sim.dialogue
        .exchanges()
        .zip(sim.contexts.iter().zip(&sim.predictions))
        .map(|(ex, (context, pred))| {
            let frame = &ex.user.frames[0];
            let target = build_target(
                frame.state.as_ref().expect("simulated user frames carry a state"),
                &frame.action_frame(Speaker::User),
                &pred.system_actions,
                &pred.response,
            );
            build_training_record(context.clone(), target)
        })
        .collect()
}

/// SHA-256 of the SGD serialization of a corpus, as lowercase hex.
pub fn corpus_digest(dialogues: &[Dialogue]) -> String {
    hex::encode(Sha256::digest(dialogues_to_json(dialogues).as_bytes()))
}
