use std::collections::BTreeMap;
use std::time::Instant;

use super::{Backend, BackendError, BackendRequest, BackendResponse};
use crate::model::{act, ActionFrame, ActiveIntent, DbResults, DialogAct, DialogState, SlotRef};
use crate::schema::{DomainSchema, IntentDef};
use crate::serializer::{build_target, parse_context};
use crate::utterance::extract_acts;

fn readable(slot: &str) -> String {
    slot.replace('_', " ")
}

fn template(a: &DialogAct) -> String {
    let slot = readable(a.slot_name());
    let value = a.values.join(" or ");
    match a.act.as_str() {
        act::GREET => "Hello, what can I do for you?".into(),
        act::REQUEST => format!("What {slot} would you like?"),
        act::OFFER => format!("How about {slot} {value}?"),
        act::INFORM => format!("The {slot} is {value}."),
        act::CONFIRM => format!("Please confirm: {slot} {value}."),
        act::NOTIFY_SUCCESS => "Your request has been completed.".into(),
        act::NOTIFY_FAILURE => "Sorry, nothing matches your request.".into(),
        act::GOODBYE => "Goodbye, have a nice day.".into(),
        other => format!("{}.", readable(&other.to_lowercase())),
    }
}

fn respond(system: Vec<DialogAct>, cursor: Option<usize>) -> (ActionFrame, String, Option<usize>) {
    let text = if system.is_empty() {
        "One moment while I check.".to_string()
    } else {
        system.iter().map(template).collect::<Vec<_>>().join(" ")
    };
    (ActionFrame::system(system), text, cursor)
}

fn offer(domain: &str, intent: &IntentDef, record: &BTreeMap<String, String>) -> Vec<DialogAct> {
    // Only slots the user can constrain, so it can spot conflicts with its
    // goal. Other result slots are given on request.
    intent
        .constrainable_slots()
        .filter_map(|s| {
            record
                .get(s)
                .map(|v| DialogAct::new(domain, act::OFFER).with_slot(s).with_value(v))
        })
        .collect()
}

fn inform_requested(domain: &str, state: &DialogState, record: &BTreeMap<String, String>) -> Vec<DialogAct> {
    state
        .requested_slots
        .iter()
        .filter(|k| k.domain == domain)
        .filter_map(|k| {
            record
                .get(&k.slot)
                .map(|v| DialogAct::new(domain, act::INFORM).with_slot(&k.slot).with_value(v))
        })
        .collect()
}

/// One deterministic system move.
///
/// Rules are tried in order:
/// 1. the user says goodbye or thanks: GOODBYE
/// 2. no active intent: GREET
/// 3. a required slot is unfilled: REQUEST the lexicographically first one
/// 4. no database results yet: no acts (the caller should query)
/// 5. empty results: NOTIFY_FAILURE
/// 6. AFFIRM of an outstanding offer for a transactional intent: NOTIFY_SUCCESS
/// 7. SELECT of the offer: INFORM requested slots, then CONFIRM the
///    constraints (transactional) or NOTIFY_SUCCESS
/// 8. NEGATE or REQUEST_ALTS of the offer: OFFER the next record, or
///    NOTIFY_FAILURE when none is left
/// 9. nothing offered yet: OFFER the first record
/// 10. otherwise INFORM requested slots, or repeat the offer
///
/// `offer_cursor` is the position of the outstanding offer in `db`.
pub fn rule_agent_step(
    state: &DialogState,
    user_actions: &ActionFrame,
    schema: &DomainSchema,
    db: Option<&DbResults>,
    offer_cursor: Option<usize>,
) -> (ActionFrame, String, Option<usize>) {
    let domain = schema.service_name.as_str();
    let says = |t: &str| user_actions.contains(t);

    if says(act::GOODBYE) || says(act::THANK_YOU) {
        return respond(vec![DialogAct::new(domain, act::GOODBYE)], None);
    }
    let Some(intent) = state.active_intent.name().and_then(|n| schema.intent(n)) else {
        return respond(vec![DialogAct::new(domain, act::GREET)], None);
    };
    let filled = state.domain_values(domain);
    let mut missing: Vec<&String> = intent
        .required_slots
        .iter()
        .filter(|s| !filled.contains_key(s.as_str()))
        .collect();
    missing.sort();
    if let Some(slot) = missing.first() {
        return respond(
            vec![DialogAct::new(domain, act::REQUEST).with_slot(slot.as_str())],
            None,
        );
    }
    let Some(db) = db else {
        return respond(Vec::new(), offer_cursor);
    };
    if db.records.is_empty() {
        return respond(vec![DialogAct::new(domain, act::NOTIFY_FAILURE)], None);
    }
    let cursor = offer_cursor.filter(|&c| c < db.records.len());

    if let Some(c) = cursor {
        let record = &db.records[c];
        if says(act::AFFIRM) && intent.is_transactional {
            return respond(vec![DialogAct::new(domain, act::NOTIFY_SUCCESS)], Some(c));
        }
        if says(act::SELECT) {
            let mut acts = inform_requested(domain, state, record);
            if intent.is_transactional {
                acts.extend(filled.iter().map(|(slot, values)| {
                    let mut a = DialogAct::new(domain, act::CONFIRM).with_slot(*slot);
                    a.values = values.to_vec();
                    a
                }));
            } else {
                acts.push(DialogAct::new(domain, act::NOTIFY_SUCCESS));
            }
            return respond(acts, Some(c));
        }
        if says(act::NEGATE) || says(act::REQUEST_ALTS) {
            return match db.records.get(c + 1) {
                Some(next) => respond(offer(domain, intent, next), Some(c + 1)),
                None => respond(vec![DialogAct::new(domain, act::NOTIFY_FAILURE)], None),
            };
        }
        let informs = inform_requested(domain, state, record);
        if informs.is_empty() {
            return respond(offer(domain, intent, record), Some(c));
        }
        return respond(informs, Some(c));
    }
    respond(offer(domain, intent, &db.records[0]), Some(0))
}

/// [`rule_agent_step`] behind the backend contract.
///
/// The context carries no system history, so the agent remembers the last
/// record it offered and its domain. One instance serves one dialogue at a
/// time; [`Backend::begin_dialogue`] resets it.
#[derive(Debug, Clone, Default)]
pub struct RuleAgent {
    offered: Option<BTreeMap<String, String>>,
    domain: Option<String>,
}

impl RuleAgent {
    pub fn new() -> Self {
        Self::default()
    }

    /// Computes the target text for a context.
    pub fn respond(&mut self, context: &str) -> Result<String, BackendError> {
        let ctx = parse_context(context).map_err(|e| BackendError::InvalidContext(e.to_string()))?;
        let user_acts = extract_acts(&ctx.user_utterance).unwrap_or_default();
        if let Some(a) = user_acts.iter().find(|a| a.is(act::INFORM_INTENT)) {
            self.domain = Some(a.domain.clone());
        }
        let schema = self
            .domain
            .as_deref()
            .and_then(|d| ctx.schemas.iter().find(|s| s.service_name == d))
            .or_else(|| ctx.schemas.first());
        let user = ActionFrame::user(user_acts.clone());
        let Some(schema) = schema else {
            let target = build_target(&ctx.prev_state, &user, &ActionFrame::system(Vec::new()), "");
            return Ok(target.text);
        };

        let state = track_state(&ctx.prev_state, &user_acts);
        let cursor = match (&ctx.db, &self.offered) {
            (Some(db), Some(offered)) => db.records.iter().position(|r| r == offered),
            _ => None,
        };
        let (system, response, next) = rule_agent_step(&state, &user, schema, ctx.db.as_ref(), cursor);
        if let Some(db) = &ctx.db {
            self.offered = next.and_then(|c| db.records.get(c).cloned());
        }
        Ok(build_target(&state, &user, &system, &response).text)
    }
}

/// Previous state updated with this turn's user acts. INFORM_INTENT switches
/// the intent, INFORM overwrites a slot and the requested slots are exactly
/// this turn's REQUEST acts.
pub fn track_state(prev: &DialogState, user_acts: &[DialogAct]) -> DialogState {
    let mut state = prev.clone();
    state.requested_slots.clear();
    for a in user_acts {
        match a.act.as_str() {
            act::INFORM_INTENT => {
                if let Some(name) = a.values.first() {
                    state.active_intent = ActiveIntent::from_sgd(name);
                }
            }
            act::INFORM => {
                if let Some(slot) = &a.slot {
                    state.set_slot(SlotRef::new(&a.domain, slot), a.values.clone());
                }
            }
            act::REQUEST => {
                if let Some(slot) = &a.slot {
                    state.requested_slots.insert(SlotRef::new(&a.domain, slot));
                }
            }
            _ => {}
        }
    }
    state
}

impl Backend for RuleAgent {
    fn name(&self) -> &str {
        "rule"
    }

    fn begin_dialogue(&mut self, _dialogue_id: &str) {
        *self = RuleAgent::new();
    }

    fn generate(&mut self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let start = Instant::now();
        let text = self.respond(&request.context)?;
        Ok(BackendResponse {
            id: request.id.clone(),
            text,
            latency: start.elapsed(),
        })
    }
}
