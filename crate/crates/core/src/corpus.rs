//! SGD dialogue files, seen/unseen splits and corpus statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CorpusError;
use crate::model::{
    validate_actions, validate_state, ActionFrame, ActiveIntent, DbResults, DialogAct, DialogState, SlotRef, Speaker,
};
use crate::schema::{find_schema, DomainSchema};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub services: Vec<String>,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Turn {
    pub speaker: Speaker,
    pub utterance: String,
    pub frames: Vec<Frame>,
}

/// Per-service annotation of a turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub service: String,
    /// Cumulative state; present on user turns only.
    pub state: Option<DialogState>,
    pub actions: Vec<DialogAct>,
    pub service_call: Option<ServiceCall>,
    pub service_results: Option<Vec<BTreeMap<String, String>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceCall {
    pub method: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, String>,
}

impl Frame {
    pub fn new(service: impl Into<String>) -> Self {
        Frame {
            service: service.into(),
            state: None,
            actions: Vec::new(),
            service_call: None,
            service_results: None,
        }
    }

    pub fn action_frame(&self, actor: Speaker) -> ActionFrame {
        ActionFrame {
            actor,
            acts: self.actions.clone(),
        }
    }

    /// The database lookup attached to a system frame, if any.
    pub fn db_results(&self) -> Option<DbResults> {
        let records = self.service_results.clone()?;
        Some(DbResults {
            query_intent: self.service_call.as_ref().map(|c| c.method.clone()).unwrap_or_default(),
            records,
        })
    }
}

impl Turn {
    pub fn frame(&self, service: &str) -> Option<&Frame> {
        self.frames.iter().find(|f| f.service == service)
    }
}

/// One user turn and the system turn answering it.
#[derive(Debug, Clone, Copy)]
pub struct Exchange<'a> {
    pub user_index: usize,
    pub user: &'a Turn,
    pub system: Option<&'a Turn>,
}

impl Dialogue {
    pub fn exchanges(&self) -> impl Iterator<Item = Exchange<'_>> {
        self.turns
            .iter()
            .enumerate()
            .filter(|(_, t)| t.speaker == Speaker::User)
            .map(|(i, user)| Exchange {
                user_index: i,
                user,
                system: self.turns.get(i + 1).filter(|t| t.speaker == Speaker::System),
            })
    }

    /// Number of user turns, which is the dialogue length used for bucketing.
    pub fn user_turn_count(&self) -> usize {
        self.turns.iter().filter(|t| t.speaker == Speaker::User).count()
    }
}

/// The annotated cumulative state of `service` at a user turn.
pub fn gold_state_at(dialogue: &Dialogue, turn_index: usize, service: &str) -> Result<DialogState, CorpusError> {
    dialogue
        .turns
        .get(turn_index)
        .filter(|t| t.speaker == Speaker::User)
        .and_then(|t| t.frame(service))
        .and_then(|f| f.state.clone())
        .ok_or_else(|| CorpusError::NoSuchFrame {
            dialogue_id: dialogue.dialogue_id.clone(),
            turn: turn_index,
            service: service.to_string(),
        })
}

// ---- SGD wire format ----

#[derive(Debug, Serialize, Deserialize)]
struct RawDialogue {
    dialogue_id: String,
    services: Vec<String>,
    turns: Vec<RawTurn>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawTurn {
    speaker: String,
    utterance: String,
    #[serde(default)]
    frames: Vec<RawFrame>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawFrame {
    service: String,
    #[serde(default)]
    slots: Vec<serde_json::Value>,
    #[serde(default)]
    actions: Vec<RawAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state: Option<RawState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    service_call: Option<ServiceCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    service_results: Option<Vec<BTreeMap<String, String>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawAction {
    act: String,
    #[serde(default)]
    slot: String,
    #[serde(default)]
    values: Vec<String>,
    #[serde(default)]
    canonical_values: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawState {
    active_intent: String,
    #[serde(default)]
    requested_slots: Vec<String>,
    #[serde(default)]
    slot_values: BTreeMap<String, Vec<String>>,
}

fn lift_dialogue(raw: RawDialogue) -> Result<Dialogue, CorpusError> {
    let id = raw.dialogue_id.trim().to_string();
    let services: Vec<String> = raw.services.iter().map(|s| s.trim().to_string()).collect();
    let mut turns = Vec::with_capacity(raw.turns.len());
    for (i, rt) in raw.turns.into_iter().enumerate() {
        let at = |what: &str| format!("dialogue `{id}` turn {i}{what}");
        let speaker = match rt.speaker.trim() {
            "USER" => Speaker::User,
            "SYSTEM" => Speaker::System,
            other => return Err(CorpusError::annotation(at(""), format!("unknown speaker `{other}`"))),
        };
        let expected = if i % 2 == 0 { Speaker::User } else { Speaker::System };
        if speaker != expected {
            return Err(CorpusError::annotation(
                at(""),
                format!("expected {expected} turn, found {speaker}"),
            ));
        }
        let mut frames = Vec::with_capacity(rt.frames.len());
        for rf in rt.frames {
            let service = rf.service.trim().to_string();
            if !services.contains(&service) {
                return Err(CorpusError::annotation(
                    at(""),
                    format!("frame for undeclared service `{service}`"),
                ));
            }
            let state = match (speaker, rf.state) {
                (Speaker::User, None) => {
                    return Err(CorpusError::annotation(
                        at(&format!(" frame `{service}`")),
                        "user frame without state".into(),
                    ))
                }
                (Speaker::User, Some(s)) => Some(lift_state(&service, s)),
                (Speaker::System, _) => None,
            };
            let actions = rf
                .actions
                .into_iter()
                .map(|a| DialogAct {
                    domain: service.clone(),
                    act: a.act.trim().to_string(),
                    slot: Some(a.slot.trim().to_string()).filter(|s| !s.is_empty()),
                    values: a.values,
                })
                .collect();
            frames.push(Frame {
                service,
                state,
                actions,
                service_call: rf.service_call,
                service_results: rf.service_results,
            });
        }
        turns.push(Turn {
            speaker,
            utterance: rt.utterance,
            frames,
        });
    }
    Ok(Dialogue {
        dialogue_id: id,
        services,
        turns,
    })
}

fn lift_state(service: &str, raw: RawState) -> DialogState {
    let mut state = DialogState {
        active_intent: ActiveIntent::from_sgd(&raw.active_intent),
        requested_slots: raw
            .requested_slots
            .iter()
            .map(|s| SlotRef::new(service, s.trim()))
            .collect(),
        slot_values: BTreeMap::new(),
    };
    for (slot, values) in raw.slot_values {
        state.set_slot(SlotRef::new(service, slot.trim()), values);
    }
    state
}

fn lower_dialogue(d: &Dialogue) -> RawDialogue {
    RawDialogue {
        dialogue_id: d.dialogue_id.clone(),
        services: d.services.clone(),
        turns: d
            .turns
            .iter()
            .map(|t| RawTurn {
                speaker: t.speaker.to_string(),
                utterance: t.utterance.clone(),
                frames: t.frames.iter().map(lower_frame).collect(),
            })
            .collect(),
    }
}

fn lower_frame(f: &Frame) -> RawFrame {
    RawFrame {
        service: f.service.clone(),
        slots: Vec::new(),
        actions: f
            .actions
            .iter()
            .map(|a| RawAction {
                act: a.act.clone(),
                slot: a.slot_name().to_string(),
                values: a.values.clone(),
                canonical_values: a.values.clone(),
            })
            .collect(),
        state: f.state.as_ref().map(|s| RawState {
            active_intent: s.active_intent.as_sgd().to_string(),
            requested_slots: s
                .requested_slots
                .iter()
                .filter(|k| k.domain == f.service)
                .map(|k| k.slot.clone())
                .collect(),
            slot_values: s
                .slot_values
                .iter()
                .filter(|(k, _)| k.domain == f.service)
                .map(|(k, v)| (k.slot.clone(), v.clone()))
                .collect(),
        }),
        service_call: f.service_call.clone(),
        service_results: f.service_results.clone(),
    }
}

/// Parses an SGD dialogue document.
pub fn parse_dialogue_file(bytes: &[u8]) -> Result<Vec<Dialogue>, CorpusError> {
    let raw: Vec<RawDialogue> =
        serde_json::from_slice(bytes).map_err(|e| CorpusError::from_json(e, CorpusError::annotation))?;
    raw.into_iter().map(lift_dialogue).collect()
}

pub fn dialogues_to_json(dialogues: &[Dialogue]) -> String {
    let raw: Vec<RawDialogue> = dialogues.iter().map(lower_dialogue).collect();
    serde_json::to_string_pretty(&raw).expect("dialogues serialize")
}

/// Lists dialogue files for a path: the file itself, or every
/// `dialogues_*.json` in a directory, sorted by name.
pub fn dialogue_files(path: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    if !path.is_dir() {
        if !path.exists() {
            return Err(CorpusError::io(
                path,
                std::io::Error::from(std::io::ErrorKind::NotFound),
            ));
        }
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    let entries = std::fs::read_dir(path).map_err(|e| CorpusError::io(path, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| CorpusError::io(path, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with("dialogues_") && name.ends_with(".json") {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every dialogue file under `path`, parsing files concurrently.
pub fn load_dialogue_path(path: &Path) -> Result<Vec<Dialogue>, CorpusError> {
    let files = dialogue_files(path)?;
    let parsed: Vec<Result<Vec<Dialogue>, CorpusError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = files
            .iter()
            .map(|file| {
                scope.spawn(move || {
                    let bytes = std::fs::read(file).map_err(|e| CorpusError::io(file, e))?;
                    parse_dialogue_file(&bytes).map_err(|e| match e {
                        CorpusError::AnnotationViolation { location, message } => CorpusError::AnnotationViolation {
                            location: format!("{}: {location}", file.display()),
                            message,
                        },
                        other => other,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("parser thread")).collect()
    });
    let mut out = Vec::new();
    for part in parsed {
        out.extend(part?);
    }
    Ok(out)
}

// ---- splits ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Seen,
    Unseen,
}

/// Seen and unseen domain names; the two sets are disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct DomainSplit {
    seen: BTreeSet<String>,
    unseen: BTreeSet<String>,
}

#[derive(Deserialize)]
struct RawSplit {
    #[serde(default)]
    seen: Vec<String>,
    #[serde(default)]
    unseen: Vec<String>,
}

impl DomainSplit {
    pub fn new<I, J, S, T>(seen: I, unseen: J) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: AsRef<str>,
        T: AsRef<str>,
    {
        let seen: BTreeSet<String> = seen.into_iter().map(|s| s.as_ref().trim().to_string()).collect();
        let unseen: BTreeSet<String> = unseen.into_iter().map(|s| s.as_ref().trim().to_string()).collect();
        if let Some(both) = seen.intersection(&unseen).next() {
            return Err(CorpusError::OverlappingSplit(both.clone()));
        }
        Ok(DomainSplit { seen, unseen })
    }

    /// Every service counts as seen.
    pub fn all_seen<S: AsRef<str>>(services: impl IntoIterator<Item = S>) -> Self {
        DomainSplit {
            seen: services.into_iter().map(|s| s.as_ref().trim().to_string()).collect(),
            unseen: BTreeSet::new(),
        }
    }

    /// Parses `{"seen": [...], "unseen": [...]}`.
    pub fn parse(bytes: &[u8]) -> Result<Self, CorpusError> {
        let raw: RawSplit =
            serde_json::from_slice(bytes).map_err(|e| CorpusError::from_json(e, CorpusError::schema))?;
        Self::new(raw.seen, raw.unseen)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let bytes = std::fs::read(path).map_err(|e| CorpusError::io(path, e))?;
        Self::parse(&bytes)
    }

    pub fn seen(&self) -> &BTreeSet<String> {
        &self.seen
    }

    pub fn unseen(&self) -> &BTreeSet<String> {
        &self.unseen
    }

    pub fn tag_service(&self, service: &str) -> Result<SplitTag, CorpusError> {
        if self.seen.contains(service) {
            Ok(SplitTag::Seen)
        } else if self.unseen.contains(service) {
            Ok(SplitTag::Unseen)
        } else {
            Err(CorpusError::UnclassifiedDomain(service.to_string()))
        }
    }

    /// `Unseen` as soon as one service of the dialogue is unseen.
    pub fn classify(&self, dialogue: &Dialogue) -> Result<SplitTag, CorpusError> {
        let mut tag = SplitTag::Seen;
        for service in &dialogue.services {
            if self.tag_service(service)? == SplitTag::Unseen {
                tag = SplitTag::Unseen;
            }
        }
        Ok(tag)
    }
}

#[derive(Debug, Clone)]
pub struct CorpusPartition<'a> {
    pub all: Vec<&'a Dialogue>,
    pub seen: Vec<&'a Dialogue>,
    pub unseen: Vec<&'a Dialogue>,
}

/// Splits a corpus into seen-only and unseen-involving dialogues.
pub fn partition_corpus<'a>(
    dialogues: &'a [Dialogue],
    split: &DomainSplit,
) -> Result<CorpusPartition<'a>, CorpusError> {
    let mut part = CorpusPartition {
        all: Vec::with_capacity(dialogues.len()),
        seen: Vec::new(),
        unseen: Vec::new(),
    };
    for d in dialogues {
        match split.classify(d)? {
            SplitTag::Seen => part.seen.push(d),
            SplitTag::Unseen => part.unseen.push(d),
        }
        part.all.push(d);
    }
    Ok(part)
}

// ---- statistics ----

/// Strips SGD's numeric version suffix: `Restaurants_1` is domain `Restaurants`.
pub fn domain_of_service(service: &str) -> &str {
    match service.rsplit_once('_') {
        Some((head, tail)) if !head.is_empty() && !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) => head,
        _ => service,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusStats {
    pub dialogues: usize,
    pub turns: usize,
    pub user_turns: usize,
    pub frames: usize,
    /// Dialogue count per service.
    pub services: BTreeMap<String, usize>,
    pub domains: BTreeSet<String>,
    pub warnings: Vec<String>,
}

/// Counts and annotation checks. Unresolvable annotations become warnings.
pub fn corpus_stats(dialogues: &[Dialogue], schemas: &[DomainSchema]) -> CorpusStats {
    let mut stats = CorpusStats {
        dialogues: dialogues.len(),
        ..Default::default()
    };
    for d in dialogues {
        for s in &d.services {
            *stats.services.entry(s.clone()).or_default() += 1;
            stats.domains.insert(domain_of_service(s).to_string());
        }
        stats.turns += d.turns.len();
        for (i, turn) in d.turns.iter().enumerate() {
            if turn.speaker == Speaker::User {
                stats.user_turns += 1;
            }
            for frame in &turn.frames {
                stats.frames += 1;
                let at = format!("{} turn {i} `{}`", d.dialogue_id, frame.service);
                let Some(schema) = find_schema(schemas, &frame.service) else {
                    stats.warnings.push(format!("{at}: no schema for service"));
                    continue;
                };
                let one = std::slice::from_ref(schema);
                let mut issues: Vec<String> = Vec::new();
                if let Some(state) = &frame.state {
                    if let Some(intent) = state.active_intent.name() {
                        if schema.intent(intent).is_none() {
                            issues.push(format!("unknown intent `{intent}`"));
                        }
                    }
                    issues.extend(validate_state(state, one).iter().map(|v| v.to_string()));
                }
                issues.extend(
                    validate_actions(&frame.action_frame(turn.speaker), one)
                        .iter()
                        .map(|v| v.to_string()),
                );
                if let Some(db) = frame.db_results() {
                    issues.extend(db.validate(schema).iter().map(|v| v.to_string()));
                }
                stats.warnings.extend(issues.into_iter().map(|m| format!("{at}: {m}")));
            }
        }
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TURNS: &str = r#"[
      {
        "dialogue_id": "1_00000",
        "services": ["Restaurants_1"],
        "turns": [
          {"speaker": "USER", "utterance": "I want a restaurant in San Jose.",
           "frames": [{"service": "Restaurants_1",
                       "slots": [{"slot": "city", "start": 24, "exclusive_end": 32}],
                       "actions": [{"act": "INFORM_INTENT", "slot": "intent", "values": ["FindRestaurants"]},
                                   {"act": "INFORM", "slot": "city", "values": ["San Jose"]}],
                       "state": {"active_intent": "FindRestaurants", "requested_slots": [],
                                 "slot_values": {"city": ["San Jose"]}}}]},
          {"speaker": "SYSTEM", "utterance": "What kind of food?",
           "frames": [{"service": "Restaurants_1", "slots": [],
                       "actions": [{"act": "REQUEST", "slot": "cuisine", "values": []}]}]}
        ]
      }
    ]"#;

    #[test]
    fn empty_array_is_empty_list() {
        assert!(parse_dialogue_file(b"[]").unwrap().is_empty());
    }

    #[test]
    fn two_turn_fixture() {
        let ds = parse_dialogue_file(TWO_TURNS.as_bytes()).unwrap();
        assert_eq!(ds.len(), 1);
        let d = &ds[0];
        assert_eq!(d.user_turn_count(), 1);
        assert_eq!(d.exchanges().count(), 1);
        let state = gold_state_at(d, 0, "Restaurants_1").unwrap();
        assert_eq!(state.active_intent, ActiveIntent::Named("FindRestaurants".into()));
        assert_eq!(state.slot_values.len(), 1);
        assert_eq!(
            state.slot_values[&SlotRef::new("Restaurants_1", "city")],
            vec!["San Jose"]
        );
        assert_eq!(d.turns[1].frames[0].actions[0].slot.as_deref(), Some("cuisine"));
        assert_eq!(d.turns[0].frames[0].actions[0].slot.as_deref(), Some("intent"));
    }

    #[test]
    fn system_turn_has_no_gold_state() {
        let ds = parse_dialogue_file(TWO_TURNS.as_bytes()).unwrap();
        assert!(matches!(
            gold_state_at(&ds[0], 1, "Restaurants_1"),
            Err(CorpusError::NoSuchFrame { turn: 1, .. })
        ));
        assert!(gold_state_at(&ds[0], 5, "Restaurants_1").is_err());
    }

    #[test]
    fn consecutive_user_turns_rejected() {
        let doc = TWO_TURNS.replace(r#""speaker": "SYSTEM""#, r#""speaker": "USER""#);
        let err = parse_dialogue_file(doc.as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::AnnotationViolation { .. }), "{err:?}");
    }

    #[test]
    fn undeclared_service_rejected() {
        let doc = TWO_TURNS.replace(r#""services": ["Restaurants_1"]"#, r#""services": ["Hotels_1"]"#);
        let err = parse_dialogue_file(doc.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("undeclared service"));
    }

    #[test]
    fn round_trip_is_a_fixed_point() {
        let first = parse_dialogue_file(TWO_TURNS.as_bytes()).unwrap();
        let second = parse_dialogue_file(dialogues_to_json(&first).as_bytes()).unwrap();
        assert_eq!(first, second);
    }

    fn dialogue(id: &str, services: &[&str]) -> Dialogue {
        Dialogue {
            dialogue_id: id.into(),
            services: services.iter().map(|s| s.to_string()).collect(),
            turns: Vec::new(),
        }
    }

    #[test]
    fn partition_by_definition() {
        let ds = vec![dialogue("1", &["A"]), dialogue("2", &["B"]), dialogue("3", &["A", "B"])];
        let split = DomainSplit::new(["A"], ["B"]).unwrap();
        let p = partition_corpus(&ds, &split).unwrap();
        let ids = |v: &[&Dialogue]| v.iter().map(|d| d.dialogue_id.clone()).collect::<Vec<_>>();
        assert_eq!(ids(&p.seen), ["1"]);
        assert_eq!(ids(&p.unseen), ["2", "3"]);
        assert_eq!(p.all.len(), 3);
    }

    #[test]
    fn all_seen_gives_empty_unseen_partition() {
        let ds = vec![dialogue("1", &["A"]), dialogue("2", &["C"])];
        let p = partition_corpus(&ds, &DomainSplit::all_seen(["A", "C"])).unwrap();
        assert!(p.unseen.is_empty());
        assert_eq!(p.seen.len(), 2);
    }

    #[test]
    fn unclassified_domain_is_an_error() {
        let ds = vec![dialogue("1", &["Z"])];
        let split = DomainSplit::new(["A"], ["B"]).unwrap();
        assert!(matches!(partition_corpus(&ds, &split), Err(CorpusError::UnclassifiedDomain(d)) if d == "Z"));
    }

    #[test]
    fn overlapping_split_rejected() {
        assert!(DomainSplit::new(["A", "B"], ["B"]).is_err());
        let split = DomainSplit::parse(br#"{"seen": [" A "], "unseen": ["B"]}"#).unwrap();
        assert!(split.seen().contains("A"));
    }

    #[test]
    fn domain_names_drop_version_suffix() {
        assert_eq!(domain_of_service("Restaurants_1"), "Restaurants");
        assert_eq!(domain_of_service("Rent_a_car_2"), "Rent_a_car");
        assert_eq!(domain_of_service("Weather"), "Weather");
    }
}
