//! State-summarized serialization.
//!
//! A turn is serialized as a context (previous state, user utterance,
//! schemas, database results, system action types) followed by a target
//! (current state, user acts, system acts, response). The exact byte layout
//! is described in `GRAMMAR.md` at the repository root.

mod context;
mod escape;
mod record;
mod target;

pub mod baseline;

use std::ops::Range;

pub use context::{build_context, build_context_with, parse_context, ContextOptions, ContextString, ParsedContext};
pub use escape::{escape, unescape, SEP};
pub use record::{build_training_record, read_training_records, write_training_records, RecordLine, TrainingRecord};
pub use target::{build_target, parse_generation, ParsedTurnOutput, TargetString};

use crate::model::{ActionFrame, ActiveIntent, DialogAct, DialogState, SlotRef, Speaker};
use escape::{join_fields, split_fields};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContextParseError {
    #[error("context is missing section `{0}`")]
    MissingSection(&'static str),
    #[error("malformed line in `{section}`: {line}")]
    MalformedLine { section: &'static str, line: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContextSection {
    PrevState,
    UserUtterance,
    Schemas,
    DbResults,
    ActionTypeList,
}

impl ContextSection {
    pub const ALL: [ContextSection; 5] = [
        ContextSection::PrevState,
        ContextSection::UserUtterance,
        ContextSection::Schemas,
        ContextSection::DbResults,
        ContextSection::ActionTypeList,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ContextSection::PrevState => "prev_state",
            ContextSection::UserUtterance => "user",
            ContextSection::Schemas => "schemas",
            ContextSection::DbResults => "db",
            ContextSection::ActionTypeList => "action_types",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TargetSection {
    DialogState,
    UserActions,
    SystemActions,
    Response,
}

impl TargetSection {
    pub const ALL: [TargetSection; 4] = [
        TargetSection::DialogState,
        TargetSection::UserActions,
        TargetSection::SystemActions,
        TargetSection::Response,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            TargetSection::DialogState => "state",
            TargetSection::UserActions => "user_actions",
            TargetSection::SystemActions => "system_actions",
            TargetSection::Response => "response",
        }
    }
}

pub(crate) fn open_tag(tag: &str) -> String {
    format!("<{tag}>")
}

pub(crate) fn close_tag(tag: &str) -> String {
    format!("</{tag}>")
}

/// Appends tagged sections to a buffer and remembers where each one lies.
pub(crate) struct SectionWriter<S> {
    pub text: String,
    pub spans: Vec<(S, Range<usize>)>,
}

impl<S: Copy> SectionWriter<S> {
    pub fn new(outer: &str) -> Self {
        SectionWriter {
            text: format!("{}\n", open_tag(outer)),
            spans: Vec::new(),
        }
    }

    /// `payload` is a sequence of `\n`-terminated lines.
    pub fn section(&mut self, section: S, tag: &str, payload: &str) {
        let start = self.text.len();
        self.text.push_str(&open_tag(tag));
        self.text.push('\n');
        self.text.push_str(payload);
        self.text.push_str(&close_tag(tag));
        self.text.push('\n');
        self.spans.push((section, start..self.text.len()));
    }

    pub fn finish(mut self, outer: &str) -> (String, Vec<(S, Range<usize>)>) {
        self.text.push_str(&close_tag(outer));
        self.text.push('\n');
        (self.text, self.spans)
    }
}

/// Splits text into lines, tolerating a missing final newline and CRLF.
pub(crate) fn lines(text: &str) -> Vec<&str> {
    let mut out: Vec<&str> = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    if text.ends_with('\n') || text.is_empty() {
        out.pop();
    }
    out
}

/// Collects the payload lines of every `<tag> ... </tag>` region, keyed by
/// tag. Unterminated regions and stray lines are reported in `warnings`.
pub(crate) struct SectionScan<'a> {
    pub sections: Vec<(&'a str, Vec<&'a str>)>,
    pub any_tag: bool,
    pub warnings: Vec<String>,
}

pub(crate) fn scan_sections<'a>(text: &'a str, known: &[&'a str], outer: &str) -> SectionScan<'a> {
    let mut scan = SectionScan {
        sections: Vec::new(),
        any_tag: false,
        warnings: Vec::new(),
    };
    let outer_open = open_tag(outer);
    let outer_close = close_tag(outer);
    let mut saw_open = false;
    let mut saw_close = false;
    let mut current: Option<(&'a str, Vec<&'a str>)> = None;
    for line in lines(text) {
        if line == outer_open {
            saw_open = true;
            scan.any_tag = true;
            continue;
        }
        if line == outer_close {
            saw_close = true;
            scan.any_tag = true;
            if let Some((tag, _)) = current.take() {
                scan.warnings.push(format!("section <{tag}> not terminated; dropped"));
            }
            continue;
        }
        if let Some(tag) = known.iter().find(|t| line.len() == t.len() + 2 && line == open_tag(t)) {
            scan.any_tag = true;
            if let Some((prev, _)) = current.take() {
                scan.warnings.push(format!("section <{prev}> not terminated; dropped"));
            }
            current = Some((tag, Vec::new()));
            continue;
        }
        if let Some(tag) = known.iter().find(|t| line.len() == t.len() + 3 && line == close_tag(t)) {
            scan.any_tag = true;
            match current.take() {
                Some((open, body)) if open == *tag => {
                    if scan.sections.iter().any(|(t, _)| t == tag) {
                        scan.warnings.push(format!("duplicate section <{tag}> ignored"));
                    } else {
                        scan.sections.push((tag, body));
                    }
                }
                Some((open, _)) => {
                    scan.warnings
                        .push(format!("section <{open}> closed by </{tag}>; dropped"));
                }
                None => scan.warnings.push(format!("stray </{tag}> skipped")),
            }
            continue;
        }
        match current.as_mut() {
            Some((_, body)) => body.push(line),
            None => {
                if !line.is_empty() {
                    scan.warnings.push(format!("stray line skipped: {}", truncate(line)));
                }
            }
        }
    }
    if let Some((tag, _)) = current {
        scan.warnings.push(format!("section <{tag}> truncated; dropped"));
    }
    if scan.any_tag {
        if !saw_open {
            scan.warnings.push(format!("missing {outer_open}"));
        }
        if !saw_close {
            scan.warnings.push(format!("missing {outer_close}"));
        }
    }
    scan
}

fn truncate(line: &str) -> String {
    line.chars().take(40).collect()
}

// ---- shared line encodings ----

const INTENT_KEY: &str = "intent";
const SLOT_KEY: &str = "slot";
const REQUESTED_KEY: &str = "requested";
const ACT_KEY: &str = "act";

pub(crate) fn encode_state(state: &DialogState) -> String {
    let mut out = String::new();
    out.push_str(&join_fields([INTENT_KEY, state.active_intent.as_sgd()]));
    out.push('\n');
    for (key, values) in &state.slot_values {
        let fields = [SLOT_KEY, key.domain.as_str(), key.slot.as_str()]
            .into_iter()
            .chain(values.iter().map(String::as_str));
        out.push_str(&join_fields(fields));
        out.push('\n');
    }
    for key in &state.requested_slots {
        out.push_str(&join_fields([REQUESTED_KEY, key.domain.as_str(), key.slot.as_str()]));
        out.push('\n');
    }
    out
}

pub(crate) fn decode_state(lines: &[&str], warnings: &mut Vec<String>) -> DialogState {
    let mut state = DialogState::new();
    let mut saw_intent = false;
    for line in lines {
        let (fields, clean) = split_fields(line);
        if !clean {
            warnings.push(format!("bad escape in state line: {}", truncate(line)));
        }
        match fields.first().map(String::as_str) {
            Some(INTENT_KEY) if fields.len() == 2 => {
                if saw_intent {
                    warnings.push("duplicate intent line ignored".into());
                    continue;
                }
                saw_intent = true;
                state.active_intent = ActiveIntent::from_sgd(&fields[1]);
            }
            Some(SLOT_KEY) if fields.len() >= 4 => {
                let key = SlotRef::new(fields[1].clone(), fields[2].clone());
                if state.slot_values.contains_key(&key) {
                    warnings.push(format!("duplicate slot {key} ignored"));
                    continue;
                }
                state.set_slot(key, fields[3..].to_vec());
            }
            Some(REQUESTED_KEY) if fields.len() == 3 => {
                state
                    .requested_slots
                    .insert(SlotRef::new(fields[1].clone(), fields[2].clone()));
            }
            _ => warnings.push(format!("malformed state line skipped: {}", truncate(line))),
        }
    }
    state
}

pub(crate) fn encode_acts(acts: &[DialogAct]) -> String {
    let mut out = String::new();
    for a in acts {
        let fields = [ACT_KEY, a.domain.as_str(), a.act.as_str(), a.slot_name()]
            .into_iter()
            .chain(a.values.iter().map(String::as_str));
        out.push_str(&join_fields(fields));
        out.push('\n');
    }
    out
}

pub(crate) fn decode_acts(lines: &[&str], actor: Speaker, warnings: &mut Vec<String>) -> ActionFrame {
    let mut frame = ActionFrame::new(actor);
    for line in lines {
        let (fields, clean) = split_fields(line);
        if !clean {
            warnings.push(format!("bad escape in act line: {}", truncate(line)));
        }
        if fields.len() < 4 || fields[0] != ACT_KEY || fields[2].is_empty() {
            warnings.push(format!("malformed act line skipped: {}", truncate(line)));
            continue;
        }
        frame.acts.push(DialogAct {
            domain: fields[1].clone(),
            act: fields[2].clone(),
            slot: Some(fields[3].clone()).filter(|s| !s.is_empty()),
            values: fields[4..].to_vec(),
        });
    }
    frame
}
