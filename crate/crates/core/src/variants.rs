//! SGD-X style schema variants.
//!
//! A variant keeps each service name and the order of its slots and intents
//! but rewrites their names and descriptions. Slots and intents therefore
//! correspond by position, which lets gold annotations be rewritten into the
//! variant's vocabulary.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::{Dialogue, Frame, ServiceCall};
use crate::error::CorpusError;
use crate::model::{act, ActiveIntent, DialogAct, DialogState, SlotRef, Speaker};
use crate::schema::DomainSchema;
use crate::utterance::{extract_acts, render_user_utterance};

/// Checks that every variant set covers exactly the base services and
/// returns the sets keyed by level, starting at 1.
pub fn load_schema_variants(
    base: &[DomainSchema],
    variant_sets: Vec<Vec<DomainSchema>>,
) -> Result<BTreeMap<usize, Vec<DomainSchema>>, CorpusError> {
    let mut out = BTreeMap::new();
    for (i, set) in variant_sets.into_iter().enumerate() {
        let level = i + 1;
        SchemaMapping::between(base, &set, level)?;
        out.insert(level, set);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default)]
struct ServiceMapping {
    slots: HashMap<String, String>,
    intents: HashMap<String, String>,
}

/// Base-to-variant name translation for a set of services.
#[derive(Debug, Clone, Default)]
pub struct SchemaMapping {
    services: HashMap<String, ServiceMapping>,
}

impl SchemaMapping {
    pub fn between(base: &[DomainSchema], variant: &[DomainSchema], level: usize) -> Result<Self, CorpusError> {
        let mismatch = |message: String| CorpusError::VariantMismatch { level, message };
        if let Some(extra) = variant
            .iter()
            .find(|v| !base.iter().any(|b| b.service_name == v.service_name))
        {
            return Err(mismatch(format!("extra service `{}`", extra.service_name)));
        }
        let mut services = HashMap::new();
        for b in base {
            let v = variant
                .iter()
                .find(|v| v.service_name == b.service_name)
                .ok_or_else(|| mismatch(format!("missing service `{}`", b.service_name)))?;
            if v.slots.len() != b.slots.len() || v.intents.len() != b.intents.len() {
                return Err(mismatch(format!(
                    "service `{}` has {} slots / {} intents, base has {} / {}",
                    b.service_name,
                    v.slots.len(),
                    v.intents.len(),
                    b.slots.len(),
                    b.intents.len()
                )));
            }
            let slots = b
                .slots
                .iter()
                .zip(&v.slots)
                .map(|(x, y)| (x.name.clone(), y.name.clone()))
                .collect();
            let intents = b
                .intents
                .iter()
                .zip(&v.intents)
                .map(|(x, y)| (x.name.clone(), y.name.clone()))
                .collect();
            services.insert(b.service_name.clone(), ServiceMapping { slots, intents });
        }
        Ok(SchemaMapping { services })
    }

    pub fn slot<'a>(&'a self, service: &str, name: &'a str) -> &'a str {
        self.services
            .get(service)
            .and_then(|m| m.slots.get(name))
            .map(String::as_str)
            .unwrap_or(name)
    }

    pub fn intent<'a>(&'a self, service: &str, name: &'a str) -> &'a str {
        self.services
            .get(service)
            .and_then(|m| m.intents.get(name))
            .map(String::as_str)
            .unwrap_or(name)
    }

    /// Rewrites a frame state of `service`.
    pub fn state_for(&self, service: &str, state: &DialogState) -> DialogState {
        DialogState {
            active_intent: match &state.active_intent {
                ActiveIntent::Named(name) => ActiveIntent::Named(self.intent(service, name).to_string()),
                ActiveIntent::None => ActiveIntent::None,
            },
            requested_slots: state.requested_slots.iter().map(|k| self.slot_ref(k)).collect(),
            slot_values: state
                .slot_values
                .iter()
                .map(|(k, v)| (self.slot_ref(k), v.clone()))
                .collect(),
        }
    }

    fn slot_ref(&self, k: &SlotRef) -> SlotRef {
        SlotRef::new(k.domain.clone(), self.slot(&k.domain, &k.slot))
    }

    pub fn act(&self, a: &DialogAct) -> DialogAct {
        let names_intent = a.slot.as_deref() == Some("intent") || a.is(act::OFFER_INTENT) || a.is(act::INFORM_INTENT);
        DialogAct {
            domain: a.domain.clone(),
            act: a.act.clone(),
            slot: a.slot.as_deref().map(|s| self.slot(&a.domain, s).to_string()),
            values: if names_intent {
                a.values.iter().map(|v| self.intent(&a.domain, v).to_string()).collect()
            } else {
                a.values.clone()
            },
        }
    }

    fn record(&self, service: &str, record: &BTreeMap<String, String>) -> BTreeMap<String, String> {
        record
            .iter()
            .map(|(k, v)| (self.slot(service, k).to_string(), v.clone()))
            .collect()
    }

    fn frame(&self, frame: &Frame) -> Frame {
        let service = frame.service.as_str();
        Frame {
            service: frame.service.clone(),
            state: frame.state.as_ref().map(|s| self.state_for(service, s)),
            actions: frame.actions.iter().map(|a| self.act(a)).collect(),
            service_call: frame.service_call.as_ref().map(|c| ServiceCall {
                method: self.intent(service, &c.method).to_string(),
                parameters: self.record(service, &c.parameters),
            }),
            service_results: frame
                .service_results
                .as_ref()
                .map(|rs| rs.iter().map(|r| self.record(service, r)).collect()),
        }
    }

    /// Rewrites every annotation of a dialogue into variant names. Structured
    /// user utterances are re-rendered; free text is left alone.
    pub fn dialogue(&self, d: &Dialogue) -> Dialogue {
        let mut out = d.clone();
        for turn in &mut out.turns {
            let speaker = turn.speaker;
            turn.frames = turn.frames.iter().map(|f| self.frame(f)).collect();
            if speaker == Speaker::User {
                if let Some(acts) = extract_acts(&turn.utterance) {
                    let mapped: Vec<DialogAct> = acts.iter().map(|a| self.act(a)).collect();
                    turn.utterance = render_user_utterance(&mapped);
                }
            }
        }
        out
    }
}

/// An order-preserving surface rename: every slot and intent name gets a
/// level prefix and every description is reworded. Prefixing keeps the
/// lexicographic order of names within a service.
pub fn surface_variant(base: &[DomainSchema], level: usize) -> Vec<DomainSchema> {
    let slot_prefix = format!("v{level}_");
    let intent_prefix = format!("V{level}");
    let rename_slot = |s: &str| format!("{slot_prefix}{s}");
    base.iter()
        .map(|schema| {
            let mut v = schema.clone();
            v.description = format!("(variant {level}) {}", schema.description);
            for slot in &mut v.slots {
                slot.name = rename_slot(&slot.name);
                slot.description = format!("{} (v{level})", slot.description);
            }
            for intent in &mut v.intents {
                intent.name = format!("{intent_prefix}{}", intent.name);
                intent.description = format!("{} (v{level})", intent.description);
                intent.required_slots = intent.required_slots.iter().map(|s| rename_slot(s)).collect();
                intent.result_slots = intent.result_slots.iter().map(|s| rename_slot(s)).collect();
                intent.optional_slots = intent
                    .optional_slots
                    .iter()
                    .map(|(k, d)| (rename_slot(k), d.clone()))
                    .collect();
            }
            v
        })
        .collect()
}
