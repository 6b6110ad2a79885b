//! Corpus evaluation: replays annotated dialogues through a backend and
//! collects one [`FrameEval`] per service frame of every user turn.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::backends::{request_id, Backend, BackendError, BackendRequest};
use crate::corpus::{Dialogue, DomainSplit, SplitTag};
use crate::error::CorpusError;
use crate::metrics::FrameEval;
use crate::model::{act, ActionFrame, DbResults, DialogState, Speaker};
use crate::schema::{find_schema, DomainSchema};
use crate::serializer::{
    build_context, build_target, build_training_record, parse_generation, ParsedTurnOutput, TargetString,
    TrainingRecord,
};

/// Gold annotations for one service frame of a user turn.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldTurn {
    pub id: String,
    pub turn_index: usize,
    pub service: String,
    pub utterance: String,
    /// Gold state of the same service at its previous user frame.
    pub prev_state: DialogState,
    pub state: DialogState,
    pub user_actions: ActionFrame,
    pub system_actions: ActionFrame,
    pub response: String,
    pub db: Option<DbResults>,
}

impl GoldTurn {
    pub fn target(&self) -> TargetString {
        build_target(&self.state, &self.user_actions, &self.system_actions, &self.response)
    }
}

/// Gold turns of a dialogue, in turn order and then frame order.
pub fn gold_turns(dialogue: &Dialogue) -> Vec<GoldTurn> {
    let mut last_state: HashMap<&str, DialogState> = HashMap::new();
    let mut out = Vec::new();
    for ex in dialogue.exchanges() {
        for frame in &ex.user.frames {
            let state = frame.state.clone().unwrap_or_default();
            let system_frame = ex.system.and_then(|s| s.frame(&frame.service));
            out.push(GoldTurn {
                id: request_id(&dialogue.dialogue_id, ex.user_index, &frame.service),
                turn_index: ex.user_index,
                service: frame.service.clone(),
                utterance: ex.user.utterance.clone(),
                prev_state: last_state.get(frame.service.as_str()).cloned().unwrap_or_default(),
                state: state.clone(),
                user_actions: frame.action_frame(Speaker::User),
                system_actions: system_frame
                    .map(|f| f.action_frame(Speaker::System))
                    .unwrap_or_else(|| ActionFrame::new(Speaker::System)),
                response: ex.system.map(|s| s.utterance.clone()).unwrap_or_default(),
                db: system_frame.and_then(|f| f.db_results()),
            });
            last_state.insert(frame.service.as_str(), state);
        }
    }
    out
}

fn service_schema(schemas: &[DomainSchema], service: &str) -> Vec<DomainSchema> {
    find_schema(schemas, service).into_iter().cloned().collect()
}

/// Training records of an annotated dialogue: the gold-mode context of each
/// user frame followed by its gold target.
pub fn gold_training_records(dialogue: &Dialogue, schemas: &[DomainSchema]) -> Vec<TrainingRecord> {
    let action_types = act::system_act_types();
    gold_turns(dialogue)
        .into_iter()
        .map(|gold| {
            let schema = service_schema(schemas, &gold.service);
            let context = build_context(
                &gold.prev_state,
                &gold.utterance,
                &schema,
                gold.db.as_ref(),
                &action_types,
            );
            build_training_record(context, gold.target())
        })
        .collect()
}

/// Where the previous-state section of each context comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContextMode {
    /// The backend's own prediction from the previous turn.
    #[default]
    Predicted,
    /// The gold annotation, as in turn-level state tracking evaluation.
    Gold,
}

impl std::str::FromStr for ContextMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "predicted" => Ok(ContextMode::Predicted),
            "gold" => Ok(ContextMode::Gold),
            other => Err(format!("unknown context mode `{other}` (expected predicted or gold)")),
        }
    }
}

/// Frames, the first failure if any, and the request count of one dialogue.
pub type DialogueOutcome = (Vec<FrameEval>, Option<DialogueFailure>, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DialogueFailure {
    pub dialogue_id: String,
    pub turn_id: String,
    pub error: BackendError,
}

#[derive(Debug, Clone, Default)]
pub struct CorpusRun {
    pub frames: Vec<FrameEval>,
    pub failures: Vec<DialogueFailure>,
    /// Backend requests that returned an error.
    pub failed_requests: usize,
    pub requests: usize,
}

impl CorpusRun {
    pub fn failure_rate(&self) -> f64 {
        if self.requests == 0 {
            0.0
        } else {
            self.failed_requests as f64 / self.requests as f64
        }
    }
}

/// Runs `backend` over one dialogue. After the first backend error the
/// remaining frames of the dialogue get empty predictions.
pub fn evaluate_dialogue<B: Backend + ?Sized>(
    backend: &mut B,
    dialogue: &Dialogue,
    schemas: &[DomainSchema],
    split: SplitTag,
    mode: ContextMode,
) -> DialogueOutcome {
    let action_types = act::system_act_types();
    let turn_count = dialogue.user_turn_count();
    let mut predicted_prev: HashMap<String, DialogState> = HashMap::new();
    let mut failure: Option<DialogueFailure> = None;
    let mut requests = 0;
    let mut frames = Vec::new();
    backend.begin_dialogue(&dialogue.dialogue_id);
    for gold in gold_turns(dialogue) {
        let prediction = if failure.is_some() {
            ParsedTurnOutput::empty()
        } else {
            let prev = match mode {
                ContextMode::Gold => gold.prev_state.clone(),
                ContextMode::Predicted => predicted_prev.get(&gold.service).cloned().unwrap_or_default(),
            };
            let schema = service_schema(schemas, &gold.service);
            let context = build_context(&prev, &gold.utterance, &schema, gold.db.as_ref(), &action_types);
            requests += 1;
            let request = BackendRequest {
                id: gold.id.clone(),
                context: context.text,
            };
            match backend.generate(&request) {
                Ok(resp) => parse_generation(&resp.text, &schema),
                Err(error) => {
                    failure = Some(DialogueFailure {
                        dialogue_id: dialogue.dialogue_id.clone(),
                        turn_id: gold.id.clone(),
                        error,
                    });
                    ParsedTurnOutput::empty()
                }
            }
        };
        predicted_prev.insert(gold.service.clone(), prediction.state.clone());
        frames.push(FrameEval::from_gold(
            &dialogue.dialogue_id,
            &gold,
            prediction,
            split,
            turn_count,
        ));
    }
    (frames, failure, requests)
}

/// Evaluates a corpus with `workers` threads, each owning a backend built by
/// `make_backend`. Dialogues are distributed dynamically and results are
/// returned in corpus order.
pub fn evaluate_corpus<F>(
    dialogues: &[Dialogue],
    schemas: &[DomainSchema],
    split: &DomainSplit,
    mode: ContextMode,
    workers: usize,
    make_backend: F,
) -> Result<CorpusRun, CorpusError>
where
    F: Fn() -> Result<Box<dyn Backend>, BackendError> + Sync,
{
    let tags = dialogues
        .iter()
        .map(|d| split.classify(d))
        .collect::<Result<Vec<_>, _>>()?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<DialogueOutcome>>> = Mutex::new(vec![None; dialogues.len()]);
    let workers = workers.clamp(1, dialogues.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| {
                let mut backend = make_backend();
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(dialogue) = dialogues.get(i) else { break };
                    let result = match &mut backend {
                        Ok(b) => evaluate_dialogue(b, dialogue, schemas, tags[i], mode),
                        Err(e) => unavailable(dialogue, tags[i], e.clone()),
                    };
                    slots.lock().expect("result slots")[i] = Some(result);
                }
            });
        }
    });
    let mut run = CorpusRun::default();
    for (frames, failure, requests) in slots.into_inner().expect("result slots").into_iter().flatten() {
        run.frames.extend(frames);
        run.requests += requests;
        if let Some(f) = failure {
            run.failed_requests += 1;
            run.failures.push(f);
        }
    }
    Ok(run)
}

fn unavailable(dialogue: &Dialogue, split: SplitTag, error: BackendError) -> DialogueOutcome {
    let turn_count = dialogue.user_turn_count();
    let golds = gold_turns(dialogue);
    let failure = golds.first().map(|g| DialogueFailure {
        dialogue_id: dialogue.dialogue_id.clone(),
        turn_id: g.id.clone(),
        error,
    });
    let frames = golds
        .iter()
        .map(|g| FrameEval::from_gold(&dialogue.dialogue_id, g, ParsedTurnOutput::empty(), split, turn_count))
        .collect();
    (frames, failure, usize::from(!golds.is_empty()))
}
