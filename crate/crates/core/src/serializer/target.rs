use std::ops::Range;

use super::escape::unescape;
use super::{
    decode_acts, decode_state, encode_acts, encode_state, escape, scan_sections, SectionWriter, TargetSection,
};
use crate::model::{ActionFrame, DialogState, Speaker};
use crate::schema::DomainSchema;

const OUTER: &str = "target";

/// Serialized cascade for one turn: state, user acts, system acts, response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetString {
    pub text: String,
    pub section_spans: Vec<(TargetSection, Range<usize>)>,
}

impl TargetString {
    pub fn span(&self, section: TargetSection) -> Option<Range<usize>> {
        self.section_spans
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, r)| r.clone())
    }

    pub fn section_text(&self, section: TargetSection) -> Option<&str> {
        self.span(section).map(|r| &self.text[r])
    }
}

/// Serializes the cascade. State entries are emitted in canonical order;
/// acts keep the order they were given in.
pub fn build_target(
    state: &DialogState,
    user_actions: &ActionFrame,
    system_actions: &ActionFrame,
    response: &str,
) -> TargetString {
    debug_assert_eq!(user_actions.actor, Speaker::User);
    debug_assert_eq!(system_actions.actor, Speaker::System);
    let mut w = SectionWriter::new(OUTER);
    w.section(
        TargetSection::DialogState,
        TargetSection::DialogState.tag(),
        &encode_state(state),
    );
    w.section(
        TargetSection::UserActions,
        TargetSection::UserActions.tag(),
        &encode_acts(&user_actions.acts),
    );
    w.section(
        TargetSection::SystemActions,
        TargetSection::SystemActions.tag(),
        &encode_acts(&system_actions.acts),
    );
    w.section(
        TargetSection::Response,
        TargetSection::Response.tag(),
        &format!("{}\n", escape(response)),
    );
    let (text, section_spans) = w.finish(OUTER);
    TargetString { text, section_spans }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTurnOutput {
    pub state: DialogState,
    pub user_actions: ActionFrame,
    pub system_actions: ActionFrame,
    pub response: String,
    /// One entry per repaired or dropped fragment.
    pub parse_warnings: Vec<String>,
}

impl ParsedTurnOutput {
    pub fn empty() -> Self {
        ParsedTurnOutput {
            state: DialogState::new(),
            user_actions: ActionFrame::new(Speaker::User),
            system_actions: ActionFrame::new(Speaker::System),
            response: String::new(),
            parse_warnings: Vec::new(),
        }
    }
}

/// Best-effort inverse of [`build_target`] for arbitrary backend output.
///
/// Text without any recognizable section tag is taken whole as the
/// response. Unterminated sections are dropped. The schemas are not used to
/// repair names; unknown slots are kept and show up as metric misses.
pub fn parse_generation(text: &str, _schemas: &[DomainSchema]) -> ParsedTurnOutput {
    let known: Vec<&str> = TargetSection::ALL.iter().map(|s| s.tag()).collect();
    let scan = scan_sections(text, &known, OUTER);
    let mut out = ParsedTurnOutput::empty();
    if !scan.any_tag {
        out.response = text.to_string();
        out.parse_warnings
            .push("no section tags found; whole text taken as response".into());
        return out;
    }
    out.parse_warnings = scan.warnings;
    for section in TargetSection::ALL {
        let Some((_, body)) = scan.sections.iter().find(|(t, _)| *t == section.tag()) else {
            out.parse_warnings.push(format!("missing section <{}>", section.tag()));
            continue;
        };
        let warnings = &mut out.parse_warnings;
        match section {
            TargetSection::DialogState => out.state = decode_state(body, warnings),
            TargetSection::UserActions => out.user_actions = decode_acts(body, Speaker::User, warnings),
            TargetSection::SystemActions => out.system_actions = decode_acts(body, Speaker::System, warnings),
            TargetSection::Response => {
                if body.len() != 1 {
                    warnings.push(format!("response spans {} lines", body.len()));
                }
                let mut parts = Vec::with_capacity(body.len());
                for line in body {
                    let (s, clean) = unescape(line);
                    if !clean {
                        warnings.push("bad escape in response".into());
                    }
                    parts.push(s);
                }
                out.response = parts.join("\n");
            }
        }
    }
    out
}
