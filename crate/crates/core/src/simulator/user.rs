use std::collections::BTreeMap;

use super::UserGoal;
use crate::model::{act, normalize_value, ActionFrame, ActiveIntent, DialogAct, DialogState, SlotRef, DONTCARE};
use crate::utterance::render_user_utterance;

/// A user turn with its gold annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserTurn {
    pub utterance: String,
    pub actions: ActionFrame,
    pub state: DialogState,
}

/// Replies to system acts in pursuit of a [`UserGoal`].
///
/// The first turn names the intent and one constraint. A REQUEST gets the
/// goal value (or `dontcare`), a CONFIRM gets AFFIRM. An offer that
/// contradicts the goal is rejected while patience lasts, revealing the
/// contradicted constraint; otherwise it is accepted with SELECT, together
/// with the remaining constraints and the goal's requests. Any NOTIFY act
/// ends the conversation.
#[derive(Debug, Clone)]
pub struct UserSimulator {
    goal: UserGoal,
    revealed: BTreeMap<String, String>,
    rejections: usize,
    turns: usize,
}

impl UserSimulator {
    pub fn new(goal: UserGoal) -> Self {
        UserSimulator {
            goal,
            revealed: BTreeMap::new(),
            rejections: 0,
            turns: 0,
        }
    }

    pub fn goal(&self) -> &UserGoal {
        &self.goal
    }

    /// Constraints revealed so far, keyed by slot.
    pub fn revealed(&self) -> &BTreeMap<String, String> {
        &self.revealed
    }

    fn inform(&mut self, slot: &str, value: &str) -> DialogAct {
        self.revealed.insert(slot.to_string(), value.to_string());
        DialogAct::new(&self.goal.service, act::INFORM)
            .with_slot(slot)
            .with_value(value)
    }

    fn unrevealed(&self) -> Vec<(String, String)> {
        self.goal
            .constraints
            .iter()
            .filter(|(s, _)| !self.revealed.contains_key(s))
            .cloned()
            .collect()
    }

    fn announce(&mut self) -> Vec<DialogAct> {
        let mut acts = vec![DialogAct::new(&self.goal.service, act::INFORM_INTENT)
            .with_slot("intent")
            .with_value(&self.goal.intent)];
        if let Some((slot, value)) = self.unrevealed().into_iter().next() {
            acts.push(self.inform(&slot, &value));
        }
        acts
    }

    fn answer_offer(&mut self, sys: &ActionFrame) -> Vec<DialogAct> {
        let offered: BTreeMap<&str, &str> = sys
            .of_type(act::OFFER)
            .filter_map(|a| Some((a.slot.as_deref()?, a.values.first()?.as_str())))
            .collect();
        let conflicts = |slot: &str, value: &str| {
            offered
                .get(slot)
                .is_some_and(|o| value != DONTCARE && normalize_value(o) != normalize_value(value))
        };
        let unrevealed = self.unrevealed();
        let conflicting: Vec<&(String, String)> = unrevealed.iter().filter(|(s, v)| conflicts(s, v)).collect();
        let service = self.goal.service.clone();
        if let Some((slot, value)) = conflicting.first().filter(|_| self.rejections < self.goal.patience) {
            self.rejections += 1;
            let (slot, value) = (slot.clone(), value.clone());
            return vec![DialogAct::new(&service, act::NEGATE), self.inform(&slot, &value)];
        }
        let mut acts = vec![DialogAct::new(&service, act::SELECT)];
        for (slot, value) in unrevealed.iter().filter(|(s, v)| !conflicts(s, v)) {
            acts.push(self.inform(slot, value));
        }
        for slot in self.goal.requested.clone() {
            acts.push(DialogAct::new(&service, act::REQUEST).with_slot(slot));
        }
        acts
    }

    fn reply(&mut self, sys: &ActionFrame) -> Vec<DialogAct> {
        let service = self.goal.service.clone();
        if sys.contains(act::NOTIFY_SUCCESS) || sys.contains(act::NOTIFY_FAILURE) {
            return vec![
                DialogAct::new(&service, act::THANK_YOU),
                DialogAct::new(&service, act::GOODBYE),
            ];
        }
        if sys.contains(act::GOODBYE) {
            return vec![DialogAct::new(&service, act::GOODBYE)];
        }
        if sys.contains(act::CONFIRM) {
            return vec![DialogAct::new(&service, act::AFFIRM)];
        }
        if sys.contains(act::REQUEST) {
            let slots: Vec<String> = sys.of_type(act::REQUEST).filter_map(|a| a.slot.clone()).collect();
            return slots
                .iter()
                .map(|slot| {
                    let value = self.goal.constraint(slot).unwrap_or(DONTCARE).to_string();
                    self.inform(slot, &value)
                })
                .collect();
        }
        if sys.contains(act::OFFER) {
            return self.answer_offer(sys);
        }
        if sys.contains(act::GREET) {
            return self.announce();
        }
        match self.unrevealed().into_iter().next() {
            Some((slot, value)) => vec![self.inform(&slot, &value)],
            None => vec![DialogAct::new(&service, act::GOODBYE)],
        }
    }

    /// The next user turn. `sys` is the previous system turn's acts, absent
    /// on the first turn.
    pub fn step(&mut self, sys: Option<&ActionFrame>) -> UserTurn {
        let acts = match sys {
            Some(sys) if self.turns > 0 => self.reply(sys),
            _ => self.announce(),
        };
        self.turns += 1;
        let mut state = DialogState {
            active_intent: ActiveIntent::Named(self.goal.intent.clone()),
            ..Default::default()
        };
        for (slot, value) in &self.revealed {
            state.set_slot(SlotRef::new(&self.goal.service, slot), vec![value.clone()]);
        }
        for a in acts.iter().filter(|a| a.is(act::REQUEST)) {
            state
                .requested_slots
                .insert(SlotRef::new(&self.goal.service, a.slot_name()));
        }
        UserTurn {
            utterance: render_user_utterance(&acts),
            actions: ActionFrame::user(acts),
            state,
        }
    }
}
