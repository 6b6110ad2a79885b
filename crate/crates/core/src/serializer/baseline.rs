//! Full-history context, kept only as a size reference for the
//! state-summarized context. It differs from [`super::build_context`] in one
//! place: the previous-state section is replaced by every prior utterance.

use super::context::ContextOptions;
use super::escape::join_fields;
use super::{build_context_with, close_tag, open_tag};
use crate::model::{DbResults, DialogState, Speaker};
use crate::schema::DomainSchema;

pub fn build_history_context(
    history: &[(Speaker, String)],
    user_utterance: &str,
    schemas: &[DomainSchema],
    db: Option<&DbResults>,
    action_types: &[String],
) -> String {
    let options = ContextOptions::default();
    let summarized = build_context_with(&options, &DialogState::new(), user_utterance, schemas, db, action_types);
    let mut history_section = format!("{}\n", open_tag("history"));
    for (speaker, utterance) in history {
        history_section.push_str(&join_fields([speaker.to_string().as_str(), utterance.as_str()]));
        history_section.push('\n');
    }
    history_section.push_str(&close_tag("history"));
    history_section.push('\n');
    let prev = summarized
        .span(super::ContextSection::PrevState)
        .expect("context always has a previous-state section");
    let mut text = String::with_capacity(summarized.text.len() + history_section.len());
    text.push_str(&summarized.text[..prev.start]);
    text.push_str(&history_section);
    text.push_str(&summarized.text[prev.end..]);
    text
}
