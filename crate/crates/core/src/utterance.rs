//! Structured user utterances.
//!
//! Simulated users speak a templated sentence followed by a machine-readable
//! act annotation:
//!
//! ```text
//! I'd like to FindRestaurants. My city is San Jose. [[acts [["Restaurants_1","INFORM","city",["San Jose"]]]]]
//! ```
//!
//! The annotation is a JSON array of `[domain, act, slot, values]` tuples
//! between `[[acts ` and a closing `]]` at the end of the utterance.

use crate::model::{act, DialogAct, DONTCARE};

pub const ANNOTATION_OPEN: &str = "[[acts ";
pub const ANNOTATION_CLOSE: &str = "]]";

type RawAct = (String, String, String, Vec<String>);

fn readable(name: &str) -> String {
    name.replace('_', " ")
}

fn describe(a: &DialogAct) -> String {
    let slot = readable(a.slot_name());
    let values = a.values.join(" or ");
    match a.act.as_str() {
        act::INFORM_INTENT => format!("I'd like to {values}."),
        act::INFORM if a.values.iter().any(|v| v == DONTCARE) => format!("Any {slot} is fine."),
        act::INFORM => format!("My {slot} is {values}."),
        act::REQUEST => format!("What is the {slot}?"),
        act::AFFIRM => "Yes, that's right.".into(),
        act::NEGATE => "No, that doesn't work for me.".into(),
        act::SELECT => "That one sounds good.".into(),
        act::REQUEST_ALTS => "Anything else?".into(),
        act::THANK_YOU => "Thank you.".into(),
        act::GOODBYE => "Goodbye.".into(),
        other => format!("{}.", readable(&other.to_lowercase())),
    }
}

/// Template text for a list of user acts, without the annotation.
pub fn describe_user_acts(acts: &[DialogAct]) -> String {
    acts.iter().map(describe).collect::<Vec<_>>().join(" ")
}

pub fn render_user_utterance(acts: &[DialogAct]) -> String {
    let text = describe_user_acts(acts);
    let raw: Vec<RawAct> = acts
        .iter()
        .map(|a| {
            (
                a.domain.clone(),
                a.act.clone(),
                a.slot_name().to_string(),
                a.values.clone(),
            )
        })
        .collect();
    let json = serde_json::to_string(&raw).expect("act tuples serialize");
    if text.is_empty() {
        format!("{ANNOTATION_OPEN}{json}{ANNOTATION_CLOSE}")
    } else {
        format!("{text} {ANNOTATION_OPEN}{json}{ANNOTATION_CLOSE}")
    }
}

/// The acts embedded in a structured utterance, or `None` for free text.
pub fn extract_acts(utterance: &str) -> Option<Vec<DialogAct>> {
    let start = utterance.rfind(ANNOTATION_OPEN)?;
    let body = &utterance[start + ANNOTATION_OPEN.len()..];
    let mut stream = serde_json::Deserializer::from_str(body).into_iter::<Vec<RawAct>>();
    let raw = stream.next()?.ok()?;
    let rest = &body[stream.byte_offset()..];
    if rest.trim_end() != ANNOTATION_CLOSE {
        return None;
    }
    Some(
        raw.into_iter()
            .map(|(domain, act, slot, values)| DialogAct {
                domain,
                act,
                slot: Some(slot).filter(|s| !s.is_empty()),
                values,
            })
            .collect(),
    )
}
