//! Dialog state, dialog acts and database results.
//!
//! These are the value types every other module trades in. States follow the
//! SGD convention of being cumulative per frame: a user turn's state already
//! holds everything the user has constrained so far for that service.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::schema::DomainSchema;

/// Action types used by the harness.
pub mod act {
    pub const INFORM: &str = "INFORM";
    pub const REQUEST: &str = "REQUEST";
    pub const CONFIRM: &str = "CONFIRM";
    pub const OFFER: &str = "OFFER";
    pub const NEGATE: &str = "NEGATE";
    pub const AFFIRM: &str = "AFFIRM";
    pub const NOTIFY_SUCCESS: &str = "NOTIFY_SUCCESS";
    pub const NOTIFY_FAILURE: &str = "NOTIFY_FAILURE";
    pub const INFORM_COUNT: &str = "INFORM_COUNT";
    pub const OFFER_INTENT: &str = "OFFER_INTENT";
    pub const REQUEST_ALTS: &str = "REQUEST_ALTS";
    pub const SELECT: &str = "SELECT";
    pub const THANK_YOU: &str = "THANK_YOU";
    pub const GOODBYE: &str = "GOODBYE";
    pub const GREET: &str = "GREET";
    /// User-side act announcing the intent; carries slot `intent`.
    pub const INFORM_INTENT: &str = "INFORM_INTENT";

    /// The system action-type vocabulary listed in every context.
    pub const SYSTEM_ACT_TYPES: [&str; 15] = [
        INFORM,
        REQUEST,
        CONFIRM,
        OFFER,
        NEGATE,
        AFFIRM,
        NOTIFY_SUCCESS,
        NOTIFY_FAILURE,
        INFORM_COUNT,
        OFFER_INTENT,
        REQUEST_ALTS,
        SELECT,
        THANK_YOU,
        GOODBYE,
        GREET,
    ];

    /// Acts counted by the inform metric.
    pub const INFORM_FAMILY: [&str; 2] = [INFORM, INFORM_COUNT];

    pub fn system_act_types() -> Vec<String> {
        SYSTEM_ACT_TYPES.iter().map(|s| s.to_string()).collect()
    }
}

/// SGD's catch-all value meaning the user has no preference.
pub const DONTCARE: &str = "dontcare";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Speaker {
    User,
    System,
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speaker::User => f.write_str("USER"),
            Speaker::System => f.write_str("SYSTEM"),
        }
    }
}

/// The user's active intent. `NONE` is a value of its own, as in SGD.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum ActiveIntent {
    #[default]
    None,
    Named(String),
}

impl ActiveIntent {
    pub const NONE_LITERAL: &'static str = "NONE";

    /// Reads an SGD `active_intent` field. Empty or `NONE` means no intent.
    pub fn from_sgd(raw: &str) -> Self {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed == Self::NONE_LITERAL {
            ActiveIntent::None
        } else {
            ActiveIntent::Named(trimmed.to_string())
        }
    }

    pub fn as_sgd(&self) -> &str {
        match self {
            ActiveIntent::None => Self::NONE_LITERAL,
            ActiveIntent::Named(name) => name,
        }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            ActiveIntent::None => None,
            ActiveIntent::Named(name) => Some(name),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, ActiveIntent::None)
    }
}

impl fmt::Display for ActiveIntent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_sgd())
    }
}

/// A `(domain, slot)` pair. Ordering is lexicographic by domain, then slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotRef {
    pub domain: String,
    pub slot: String,
}

impl SlotRef {
    pub fn new(domain: impl Into<String>, slot: impl Into<String>) -> Self {
        SlotRef {
            domain: domain.into(),
            slot: slot.into(),
        }
    }
}

impl fmt::Display for SlotRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.domain, self.slot)
    }
}

/// Active intent, requested slots and slot-value constraints.
///
/// `slot_values` holds at most one entry per `(domain, slot)`; each entry is
/// the list of acceptable surface values (never empty).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DialogState {
    pub active_intent: ActiveIntent,
    pub requested_slots: BTreeSet<SlotRef>,
    pub slot_values: BTreeMap<SlotRef, Vec<String>>,
}

impl DialogState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_intent(intent: impl Into<String>) -> Self {
        DialogState {
            active_intent: ActiveIntent::from_sgd(&intent.into()),
            ..Default::default()
        }
    }

    /// Sets a slot's values. Empty value lists are rejected and leave the
    /// state unchanged; the return value says whether the write happened.
    pub fn set_slot(&mut self, slot: SlotRef, values: Vec<String>) -> bool {
        if values.is_empty() {
            return false;
        }
        self.slot_values.insert(slot, values);
        true
    }

    pub fn is_empty(&self) -> bool {
        self.active_intent.is_none() && self.requested_slots.is_empty() && self.slot_values.is_empty()
    }

    /// Slot values restricted to one domain, keyed by slot name.
    pub fn domain_values(&self, domain: &str) -> BTreeMap<&str, &[String]> {
        self.slot_values
            .iter()
            .filter(|(k, _)| k.domain == domain)
            .map(|(k, v)| (k.slot.as_str(), v.as_slice()))
            .collect()
    }
}

/// One dialog act tuple `(domain, action type, slot, values)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DialogAct {
    pub domain: String,
    pub act: String,
    pub slot: Option<String>,
    pub values: Vec<String>,
}

impl DialogAct {
    pub fn new(domain: impl Into<String>, act: impl Into<String>) -> Self {
        DialogAct {
            domain: domain.into(),
            act: act.into(),
            slot: None,
            values: Vec::new(),
        }
    }

    pub fn with_slot(mut self, slot: impl Into<String>) -> Self {
        let slot = slot.into();
        self.slot = if slot.is_empty() { None } else { Some(slot) };
        self
    }

    pub fn with_value(mut self, value: impl Into<String>) -> Self {
        self.values.push(value.into());
        self
    }

    pub fn slot_name(&self) -> &str {
        self.slot.as_deref().unwrap_or("")
    }

    pub fn is(&self, act: &str) -> bool {
        self.act == act
    }
}

/// An ordered list of acts by one speaker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionFrame {
    pub actor: Speaker,
    pub acts: Vec<DialogAct>,
}

impl ActionFrame {
    pub fn new(actor: Speaker) -> Self {
        ActionFrame {
            actor,
            acts: Vec::new(),
        }
    }

    pub fn user(acts: Vec<DialogAct>) -> Self {
        ActionFrame {
            actor: Speaker::User,
            acts,
        }
    }

    pub fn system(acts: Vec<DialogAct>) -> Self {
        ActionFrame {
            actor: Speaker::System,
            acts,
        }
    }

    pub fn contains(&self, act: &str) -> bool {
        self.acts.iter().any(|a| a.is(act))
    }

    pub fn of_type<'a>(&'a self, act: &'a str) -> impl Iterator<Item = &'a DialogAct> + 'a {
        self.acts.iter().filter(move |a| a.is(act))
    }

    pub fn is_empty(&self) -> bool {
        self.acts.is_empty()
    }
}

/// Records returned by a database lookup for one intent.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DbResults {
    pub query_intent: String,
    pub records: Vec<BTreeMap<String, String>>,
}

impl DbResults {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Reports record keys that are not result slots of the query intent.
    pub fn validate(&self, schema: &DomainSchema) -> Vec<Violation> {
        let Some(intent) = schema.intent(&self.query_intent) else {
            return vec![Violation::UnknownIntent {
                domain: schema.service_name.clone(),
                intent: self.query_intent.clone(),
            }];
        };
        let mut out = Vec::new();
        for record in &self.records {
            for key in record.keys() {
                if !intent.result_slots.iter().any(|s| s == key) {
                    out.push(Violation::UnknownSlot {
                        domain: schema.service_name.clone(),
                        slot: key.clone(),
                    });
                }
            }
        }
        out
    }
}

/// Unicode NFC, lowercase, whitespace collapsed and trimmed.
pub fn normalize_value(value: &str) -> String {
    let nfc: String = value.nfc().collect();
    nfc.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Any-of matching between value lists. Two empty lists match; an empty
/// list never matches a non-empty one.
pub fn values_match(predicted: &[String], gold: &[String]) -> bool {
    if predicted.is_empty() || gold.is_empty() {
        return predicted.is_empty() && gold.is_empty();
    }
    let gold: Vec<String> = gold.iter().map(|g| normalize_value(g)).collect();
    predicted.iter().any(|p| gold.contains(&normalize_value(p)))
}

/// Change from one state to another.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StateDelta {
    /// `Some(new)` when the active intent changed.
    pub intent_change: Option<ActiveIntent>,
    pub added: Vec<(SlotRef, Vec<String>)>,
    pub changed: Vec<(SlotRef, Vec<String>)>,
    pub removed: Vec<SlotRef>,
    pub requested_added: Vec<SlotRef>,
    pub requested_removed: Vec<SlotRef>,
}

impl StateDelta {
    pub fn is_empty(&self) -> bool {
        self.intent_change.is_none()
            && self.added.is_empty()
            && self.changed.is_empty()
            && self.removed.is_empty()
            && self.requested_added.is_empty()
            && self.requested_removed.is_empty()
    }

    pub fn intent_changed(&self) -> bool {
        self.intent_change.is_some()
    }
}

pub fn state_diff(prev: &DialogState, curr: &DialogState) -> StateDelta {
    let mut delta = StateDelta::default();
    if prev.active_intent != curr.active_intent {
        delta.intent_change = Some(curr.active_intent.clone());
    }
    for (slot, values) in &curr.slot_values {
        match prev.slot_values.get(slot) {
            None => delta.added.push((slot.clone(), values.clone())),
            Some(old) if old != values => delta.changed.push((slot.clone(), values.clone())),
            Some(_) => {}
        }
    }
    delta.removed = prev
        .slot_values
        .keys()
        .filter(|k| !curr.slot_values.contains_key(*k))
        .cloned()
        .collect();
    delta.requested_added = curr
        .requested_slots
        .difference(&prev.requested_slots)
        .cloned()
        .collect();
    delta.requested_removed = prev
        .requested_slots
        .difference(&curr.requested_slots)
        .cloned()
        .collect();
    delta
}

pub fn apply_delta(prev: &DialogState, delta: &StateDelta) -> DialogState {
    let mut next = prev.clone();
    if let Some(intent) = &delta.intent_change {
        next.active_intent = intent.clone();
    }
    for slot in &delta.removed {
        next.slot_values.remove(slot);
    }
    for (slot, values) in delta.added.iter().chain(&delta.changed) {
        next.slot_values.insert(slot.clone(), values.clone());
    }
    for slot in &delta.requested_removed {
        next.requested_slots.remove(slot);
    }
    next.requested_slots.extend(delta.requested_added.iter().cloned());
    next
}

/// A reference in a state, act or record that does not resolve against the schemas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownDomain {
        domain: String,
    },
    UnknownSlot {
        domain: String,
        slot: String,
    },
    UnknownIntent {
        domain: String,
        intent: String,
    },
    ValueNotAllowed {
        domain: String,
        slot: String,
        value: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownDomain { domain } => write!(f, "unknown domain `{domain}`"),
            Violation::UnknownSlot { domain, slot } => write!(f, "unknown slot `{slot}` in `{domain}`"),
            Violation::UnknownIntent { domain, intent } => {
                write!(f, "unknown intent `{intent}` in `{domain}`")
            }
            Violation::ValueNotAllowed { domain, slot, value } => {
                write!(f, "value `{value}` not allowed for categorical slot `{domain}.{slot}`")
            }
        }
    }
}

/// Checks every `(domain, slot)` and categorical value of a state.
/// `dontcare` is accepted for any slot.
pub fn validate_state(state: &DialogState, schemas: &[DomainSchema]) -> Vec<Violation> {
    let mut out = Vec::new();
    let slots = state
        .slot_values
        .iter()
        .map(|(k, v)| (k, Some(v)))
        .chain(state.requested_slots.iter().map(|k| (k, None)));
    for (key, values) in slots {
        let Some(schema) = schemas.iter().find(|s| s.service_name == key.domain) else {
            out.push(Violation::UnknownDomain {
                domain: key.domain.clone(),
            });
            continue;
        };
        let Some(def) = schema.slot(&key.slot) else {
            out.push(Violation::UnknownSlot {
                domain: key.domain.clone(),
                slot: key.slot.clone(),
            });
            continue;
        };
        if !def.is_categorical {
            continue;
        }
        for value in values.into_iter().flatten() {
            let norm = normalize_value(value);
            let allowed = norm == DONTCARE || def.possible_values.iter().any(|p| normalize_value(p) == norm);
            if !allowed {
                out.push(Violation::ValueNotAllowed {
                    domain: key.domain.clone(),
                    slot: key.slot.clone(),
                    value: value.clone(),
                });
            }
        }
    }
    out
}

/// Checks the domain and slot of every act.
pub fn validate_actions(actions: &ActionFrame, schemas: &[DomainSchema]) -> Vec<Violation> {
    let mut out = Vec::new();
    for a in &actions.acts {
        let Some(schema) = schemas.iter().find(|s| s.service_name == a.domain) else {
            out.push(Violation::UnknownDomain {
                domain: a.domain.clone(),
            });
            continue;
        };
        match a.slot.as_deref() {
            None | Some("intent") | Some("count") => {}
            Some(slot) if schema.slot(slot).is_none() => out.push(Violation::UnknownSlot {
                domain: a.domain.clone(),
                slot: slot.to_string(),
            }),
            Some(_) => {}
        }
    }
    out
}
