//! Evaluation metrics.
//!
//! All functions are pure over a slice of [`FrameEval`]s and independent of
//! frame order and of tuple order within a frame. Averages use pairwise
//! summation so results do not depend on how the slice was assembled.
//!
//! Conventions:
//! * Goal and action accuracies skip frames with no gold tuples and an empty
//!   prediction. A frame with no gold tuples but a non-empty prediction is a
//!   joint miss and does not enter the average. This keeps joint ≤ average.
//! * A metric whose denominator is empty is 1 (perfect), except that an
//!   empty slice of frames is an error.

mod gleu;
mod report;

use thiserror::Error;

use crate::corpus::SplitTag;
use crate::eval::GoldTurn;
use crate::model::{act, normalize_value, values_match, ActionFrame, DialogAct, DialogState, SlotRef, Speaker};
use crate::serializer::ParsedTurnOutput;

pub use gleu::{gleu, gleu_tokens};
pub use report::{
    aggregate, sgdx_aggregate, BucketRow, EvalReport, MetricRow, MetricSummary, SgdxSummary, TurnBucket,
    DEFAULT_BUCKETS, METRIC_NAMES,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("no frames to evaluate")]
    EmptyInput,
    #[error("need at least 2 variant reports, got {0}")]
    TooFewVariants(usize),
    #[error("malformed turn bucket `{0}`")]
    BadBucket(String),
}

/// Gold and predicted annotations for one service frame of one user turn.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEval {
    pub dialogue_id: String,
    pub turn_id: String,
    pub service: String,
    pub split: SplitTag,
    /// User turns in the whole dialogue.
    pub turn_count: usize,
    pub gold_state: DialogState,
    pub pred_state: DialogState,
    pub gold_user: ActionFrame,
    pub pred_user: ActionFrame,
    pub gold_system: ActionFrame,
    pub pred_system: ActionFrame,
    pub gold_response: String,
    pub pred_response: String,
}

impl FrameEval {
    pub fn from_gold(
        dialogue_id: &str,
        gold: &GoldTurn,
        predicted: ParsedTurnOutput,
        split: SplitTag,
        turn_count: usize,
    ) -> Self {
        FrameEval {
            dialogue_id: dialogue_id.to_string(),
            turn_id: gold.id.clone(),
            service: gold.service.clone(),
            split,
            turn_count,
            gold_state: gold.state.clone(),
            pred_state: predicted.state,
            gold_user: gold.user_actions.clone(),
            pred_user: predicted.user_actions,
            gold_system: gold.system_actions.clone(),
            pred_system: predicted.system_actions,
            gold_response: gold.response.clone(),
            pred_response: predicted.response,
        }
    }
}

/// Sum by recursive halving.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1..=8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        1.0
    } else {
        pairwise_sum(xs) / xs.len() as f64
    }
}

fn ratio(hits: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        hits as f64 / total as f64
    }
}

fn non_empty(frames: &[FrameEval]) -> Result<(), MetricError> {
    if frames.is_empty() {
        Err(MetricError::EmptyInput)
    } else {
        Ok(())
    }
}

/// Fraction of frames whose predicted active intent equals gold. NONE is an
/// ordinary value.
pub fn intent_accuracy(frames: &[FrameEval]) -> Result<f64, MetricError> {
    non_empty(frames)?;
    let hits = frames
        .iter()
        .filter(|f| f.pred_state.active_intent == f.gold_state.active_intent)
        .count();
    Ok(ratio(hits, frames.len()))
}

/// Per-frame F1 of requested-slot sets, macro-averaged. Two empty sets are
/// a perfect frame.
pub fn requested_slots_f1(frames: &[FrameEval]) -> Result<f64, MetricError> {
    non_empty(frames)?;
    let scores: Vec<f64> = frames
        .iter()
        .map(|f| set_f1(&f.pred_state.requested_slots, &f.gold_state.requested_slots))
        .collect();
    Ok(mean(&scores))
}

fn set_f1(pred: &std::collections::BTreeSet<SlotRef>, gold: &std::collections::BTreeSet<SlotRef>) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    let tp = pred.intersection(gold).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let p = tp / pred.len() as f64;
    let r = tp / gold.len() as f64;
    2.0 * p * r / (p + r)
}

/// Running average and joint accuracy.
struct Tally {
    averages: Vec<f64>,
    joint_hits: usize,
    joint_total: usize,
}

impl Tally {
    fn new() -> Self {
        Tally {
            averages: Vec::new(),
            joint_hits: 0,
            joint_total: 0,
        }
    }

    /// `hits` of `gold` tuples were predicted; `extra` says whether some
    /// predicted tuple matches no gold tuple.
    fn add(&mut self, hits: usize, gold: usize, extra: bool) {
        if gold == 0 && !extra {
            return;
        }
        self.joint_total += 1;
        if gold > 0 {
            self.averages.push(hits as f64 / gold as f64);
        }
        if hits == gold && !extra {
            self.joint_hits += 1;
        }
    }

    fn finish(self) -> (f64, f64) {
        (mean(&self.averages), ratio(self.joint_hits, self.joint_total))
    }
}

/// `(AGA, JGA)` over slot-value tuples.
pub fn goal_accuracy(frames: &[FrameEval]) -> Result<(f64, f64), MetricError> {
    non_empty(frames)?;
    let mut tally = Tally::new();
    for f in frames {
        let gold = &f.gold_state.slot_values;
        let pred = &f.pred_state.slot_values;
        let hits = gold
            .iter()
            .filter(|(k, g)| pred.get(*k).is_some_and(|p| values_match(p, g)))
            .count();
        let extra = pred.keys().any(|k| !gold.contains_key(k));
        tally.add(hits, gold.len(), extra);
    }
    Ok(tally.finish())
}

/// Canonical key of an act for set semantics: values are normalized,
/// sorted and deduplicated.
fn act_key(a: &DialogAct) -> (String, String, Option<String>, Vec<String>) {
    let mut values: Vec<String> = a.values.iter().map(|v| normalize_value(v)).collect();
    values.sort();
    values.dedup();
    (a.domain.clone(), a.act.clone(), a.slot.clone(), values)
}

fn distinct(acts: &[DialogAct]) -> Vec<&DialogAct> {
    let mut seen = std::collections::BTreeSet::new();
    acts.iter().filter(|a| seen.insert(act_key(a))).collect()
}

/// Same domain, act and slot, and any-of value agreement.
pub fn act_matches(pred: &DialogAct, gold: &DialogAct) -> bool {
    pred.domain == gold.domain
        && pred.act == gold.act
        && pred.slot == gold.slot
        && values_match(&pred.values, &gold.values)
}

fn predicted(gold: &DialogAct, pred: &[DialogAct]) -> bool {
    pred.iter().any(|p| act_matches(p, gold))
}

/// `(inform, success)` on a 0–100 scale.
///
/// Inform is the fraction of gold INFORM and INFORM_COUNT system acts that
/// were predicted. Success is the fraction of gold system acts about a slot
/// the user requested in that frame that were predicted.
pub fn inform_success(frames: &[FrameEval]) -> Result<(f64, f64), MetricError> {
    non_empty(frames)?;
    let (mut inform_hits, mut inform_total) = (0, 0);
    let (mut success_hits, mut success_total) = (0, 0);
    for f in frames {
        for g in distinct(&f.gold_system.acts) {
            let hit = predicted(g, &f.pred_system.acts);
            if act::INFORM_FAMILY.contains(&g.act.as_str()) {
                inform_total += 1;
                inform_hits += usize::from(hit);
            }
            let requested = g
                .slot
                .as_ref()
                .is_some_and(|s| f.gold_state.requested_slots.contains(&SlotRef::new(&g.domain, s)));
            if requested {
                success_total += 1;
                success_hits += usize::from(hit);
            }
        }
    }
    Ok((
        100.0 * ratio(inform_hits, inform_total),
        100.0 * ratio(success_hits, success_total),
    ))
}

/// `(average, joint)` action accuracy for the system (AAA, JAA) or the user
/// (user AAA, user JAA).
pub fn action_accuracy(frames: &[FrameEval], actor: Speaker) -> Result<(f64, f64), MetricError> {
    non_empty(frames)?;
    let mut tally = Tally::new();
    for f in frames {
        let (gold, pred) = match actor {
            Speaker::System => (&f.gold_system.acts, &f.pred_system.acts),
            Speaker::User => (&f.gold_user.acts, &f.pred_user.acts),
        };
        let gold_set = distinct(gold);
        let hits = gold_set.iter().filter(|g| predicted(g, pred)).count();
        let extra = pred.iter().any(|p| !gold_set.iter().any(|g| act_matches(p, g)));
        tally.add(hits, gold_set.len(), extra);
    }
    Ok(tally.finish())
}

/// Macro-averaged sentence GLEU in `[0, 1]`.
pub fn mean_gleu(frames: &[FrameEval]) -> Result<f64, MetricError> {
    non_empty(frames)?;
    let scores: Vec<f64> = frames
        .iter()
        .map(|f| gleu(&f.pred_response, &f.gold_response))
        .collect();
    Ok(mean(&scores))
}

/// `(inform + success) × 0.5 + GLEU`, with every input on a 0–100 scale.
pub fn combined(inform: f64, success: f64, gleu_x100: f64) -> f64 {
    (inform + success) * 0.5 + gleu_x100
}
