use std::collections::BTreeMap;
use std::ops::Range;

use super::escape::{join_fields, split_fields, unescape};
use super::{decode_state, encode_state, escape, scan_sections, ContextParseError, ContextSection, SectionWriter};
use crate::model::{DbResults, DialogState};
use crate::schema::{DomainSchema, IntentDef, SlotDef};

const OUTER: &str = "context";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextOptions {
    /// Categorical values listed per slot.
    pub max_values_per_slot: usize,
    /// Database records listed; the total count is always given.
    pub max_db_records: usize,
}

impl Default for ContextOptions {
    fn default() -> Self {
        ContextOptions {
            max_values_per_slot: 10,
            max_db_records: 3,
        }
    }
}

/// Serialized conditioning input for one turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextString {
    pub text: String,
    pub section_spans: Vec<(ContextSection, Range<usize>)>,
}

impl ContextString {
    pub fn span(&self, section: ContextSection) -> Option<Range<usize>> {
        self.section_spans
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, r)| r.clone())
    }

    pub fn section_text(&self, section: ContextSection) -> Option<&str> {
        self.span(section).map(|r| &self.text[r])
    }
}

pub fn build_context(
    prev_state: &DialogState,
    user_utterance: &str,
    schemas: &[DomainSchema],
    db: Option<&DbResults>,
    action_types: &[String],
) -> ContextString {
    build_context_with(
        &ContextOptions::default(),
        prev_state,
        user_utterance,
        schemas,
        db,
        action_types,
    )
}

pub fn build_context_with(
    options: &ContextOptions,
    prev_state: &DialogState,
    user_utterance: &str,
    schemas: &[DomainSchema],
    db: Option<&DbResults>,
    action_types: &[String],
) -> ContextString {
    let mut w = SectionWriter::new(OUTER);
    w.section(
        ContextSection::PrevState,
        ContextSection::PrevState.tag(),
        &encode_state(prev_state),
    );
    w.section(
        ContextSection::UserUtterance,
        ContextSection::UserUtterance.tag(),
        &format!("{}\n", escape(user_utterance)),
    );
    w.section(
        ContextSection::Schemas,
        ContextSection::Schemas.tag(),
        &encode_schemas(options, schemas),
    );
    w.section(
        ContextSection::DbResults,
        ContextSection::DbResults.tag(),
        &encode_db(options, db),
    );
    w.section(
        ContextSection::ActionTypeList,
        ContextSection::ActionTypeList.tag(),
        &format!("{}\n", join_fields(action_types.iter().map(String::as_str))),
    );
    let (text, section_spans) = w.finish(OUTER);
    ContextString { text, section_spans }
}

pub(crate) fn encode_schemas(options: &ContextOptions, schemas: &[DomainSchema]) -> String {
    let mut sorted: Vec<&DomainSchema> = schemas.iter().collect();
    sorted.sort_by(|a, b| a.service_name.cmp(&b.service_name));
    let mut out = String::new();
    let mut line = |fields: Vec<&str>| {
        out.push_str(&join_fields(fields));
        out.push('\n');
    };
    for schema in sorted {
        line(vec!["service", &schema.service_name, &schema.description]);
        let mut slots: Vec<&SlotDef> = schema.slots.iter().collect();
        slots.sort_by(|a, b| a.name.cmp(&b.name));
        for slot in slots {
            let kind = if slot.is_categorical { "categorical" } else { "free" };
            let mut fields = vec!["slot", slot.name.as_str(), slot.description.as_str(), kind];
            if slot.is_categorical {
                fields.extend(
                    slot.possible_values
                        .iter()
                        .take(options.max_values_per_slot)
                        .map(String::as_str),
                );
            }
            line(fields);
        }
        let mut intents: Vec<&IntentDef> = schema.intents.iter().collect();
        intents.sort_by(|a, b| a.name.cmp(&b.name));
        for intent in intents {
            let kind = if intent.is_transactional {
                "transactional"
            } else {
                "search"
            };
            line(vec!["intent", &intent.name, &intent.description, kind]);
            let mut required: Vec<&str> = intent.required_slots.iter().map(String::as_str).collect();
            required.sort_unstable();
            line([vec!["required", intent.name.as_str()], required].concat());
            for (slot, default) in &intent.optional_slots {
                line(vec!["optional", &intent.name, slot, default]);
            }
            let mut result: Vec<&str> = intent.result_slots.iter().map(String::as_str).collect();
            result.sort_unstable();
            line([vec!["result", intent.name.as_str()], result].concat());
        }
    }
    out
}

fn encode_db(options: &ContextOptions, db: Option<&DbResults>) -> String {
    let Some(db) = db else {
        return String::new();
    };
    let mut out = String::new();
    out.push_str(&join_fields(["query", db.query_intent.as_str()]));
    out.push('\n');
    out.push_str(&join_fields(["count", db.records.len().to_string().as_str()]));
    out.push('\n');
    for record in db.records.iter().take(options.max_db_records) {
        let fields = std::iter::once("record").chain(record.iter().flat_map(|(k, v)| [k.as_str(), v.as_str()]));
        out.push_str(&join_fields(fields));
        out.push('\n');
    }
    out
}

/// Structured view of a context produced by [`build_context`]. Schemas come
/// back with at most the listed categorical values; `db_total` is the record
/// count before truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedContext {
    pub prev_state: DialogState,
    pub user_utterance: String,
    pub schemas: Vec<DomainSchema>,
    pub db: Option<DbResults>,
    pub db_total: Option<usize>,
    pub action_types: Vec<String>,
}

pub fn parse_context(text: &str) -> Result<ParsedContext, ContextParseError> {
    let known: Vec<&str> = ContextSection::ALL.iter().map(|s| s.tag()).collect();
    let scan = scan_sections(text, &known, OUTER);
    let body = |section: ContextSection| -> Result<&Vec<&str>, ContextParseError> {
        scan.sections
            .iter()
            .find(|(t, _)| *t == section.tag())
            .map(|(_, b)| b)
            .ok_or(ContextParseError::MissingSection(section.tag()))
    };
    let malformed = |section: ContextSection, line: &str| ContextParseError::MalformedLine {
        section: section.tag(),
        line: line.to_string(),
    };

    let mut warnings = Vec::new();
    let prev_lines = body(ContextSection::PrevState)?;
    let prev_state = decode_state(prev_lines, &mut warnings);
    if let Some(w) = warnings.first() {
        return Err(malformed(ContextSection::PrevState, w));
    }

    let user_lines = body(ContextSection::UserUtterance)?;
    let user_utterance = match user_lines.as_slice() {
        [one] => unescape(one).0,
        other => other.iter().map(|l| unescape(l).0).collect::<Vec<_>>().join("\n"),
    };

    let schemas =
        decode_schemas(body(ContextSection::Schemas)?).map_err(|line| malformed(ContextSection::Schemas, &line))?;
    let (db, db_total) =
        decode_db(body(ContextSection::DbResults)?).map_err(|line| malformed(ContextSection::DbResults, &line))?;

    let action_types = match body(ContextSection::ActionTypeList)?.as_slice() {
        [] | [""] => Vec::new(),
        [one] => split_fields(one).0,
        [first, ..] => return Err(malformed(ContextSection::ActionTypeList, first)),
    };
    Ok(ParsedContext {
        prev_state,
        user_utterance,
        schemas,
        db,
        db_total,
        action_types,
    })
}

fn decode_schemas(lines: &[&str]) -> Result<Vec<DomainSchema>, String> {
    let mut out: Vec<DomainSchema> = Vec::new();
    for line in lines {
        let (f, _) = split_fields(line);
        let bad = || line.to_string();
        let kind = f.first().map(String::as_str).unwrap_or("");
        if kind == "service" {
            if f.len() != 3 {
                return Err(bad());
            }
            out.push(DomainSchema {
                service_name: f[1].clone(),
                description: f[2].clone(),
                slots: Vec::new(),
                intents: Vec::new(),
            });
            continue;
        }
        let schema = out.last_mut().ok_or_else(bad)?;
        match kind {
            "slot" if f.len() >= 4 => schema.slots.push(SlotDef {
                name: f[1].clone(),
                description: f[2].clone(),
                is_categorical: f[3] == "categorical",
                possible_values: f[4..].to_vec(),
            }),
            "intent" if f.len() == 4 => schema.intents.push(IntentDef {
                name: f[1].clone(),
                description: f[2].clone(),
                is_transactional: f[3] == "transactional",
                required_slots: Vec::new(),
                optional_slots: BTreeMap::new(),
                result_slots: Vec::new(),
            }),
            "required" | "result" | "optional" if f.len() >= 2 => {
                let intent = schema.intents.iter_mut().find(|i| i.name == f[1]).ok_or_else(bad)?;
                match kind {
                    "required" => intent.required_slots = f[2..].to_vec(),
                    "result" => intent.result_slots = f[2..].to_vec(),
                    _ if f.len() == 4 => {
                        intent.optional_slots.insert(f[2].clone(), f[3].clone());
                    }
                    _ => return Err(bad()),
                }
            }
            _ => return Err(bad()),
        }
    }
    Ok(out)
}

type DbParse = (Option<DbResults>, Option<usize>);

fn decode_db(lines: &[&str]) -> Result<DbParse, String> {
    if lines.is_empty() {
        return Ok((None, None));
    }
    let mut db = DbResults::default();
    let mut total = None;
    for line in lines {
        let (f, _) = split_fields(line);
        match f.first().map(String::as_str) {
            Some("query") if f.len() == 2 => db.query_intent = f[1].clone(),
            Some("count") if f.len() == 2 => total = Some(f[1].parse::<usize>().map_err(|_| line.to_string())?),
            Some("record") if f.len() % 2 == 1 => {
                db.records
                    .push(f[1..].chunks(2).map(|kv| (kv[0].clone(), kv[1].clone())).collect());
            }
            _ => return Err(line.to_string()),
        }
    }
    Ok((Some(db), total))
}
