//! Interactive session with one backend over one service.
//!
//! Plain lines are sent as the user utterance. A line starting with `:` is
//! act shorthand, `ACT [slot[=value[|value...]]]` separated by `;`, which is
//! rendered into an annotated utterance the rule agent can read:
//!
//! ```text
//! :INFORM_INTENT intent=FindRestaurants; INFORM city=San Jose
//! ```

use std::io::{BufRead, IsTerminal, Write};

use anyhow::Context;
use sgtod_core::backends::request_id;
use sgtod_core::schema::find_schema;
use sgtod_core::simulator::{system_turn, SyntheticDb, DEFAULT_RECORDS_PER_DOMAIN};
use sgtod_core::utterance::render_user_utterance;
use sgtod_core::{ActionFrame, DialogAct, DialogState};

use crate::commands::{load_dialogues, load_schemas};
use crate::config::{usage, RunConfig};

const HELP: &str = "commands: /state  /reset  /help  /quit   act shorthand: :ACT slot=value; ACT slot";

pub fn format_state(state: &DialogState) -> String {
    let mut out = format!("intent: {}\n", state.active_intent);
    for (slot, values) in &state.slot_values {
        out.push_str(&format!("  {slot} = {}\n", values.join(" | ")));
    }
    if !state.requested_slots.is_empty() {
        let requested: Vec<String> = state.requested_slots.iter().map(ToString::to_string).collect();
        out.push_str(&format!("  requested: {}\n", requested.join(", ")));
    }
    out
}

pub fn format_acts(frame: &ActionFrame) -> String {
    if frame.acts.is_empty() {
        return "(none)".into();
    }
    let acts: Vec<String> = frame
        .acts
        .iter()
        .map(|a| match (&a.slot, a.values.is_empty()) {
            (None, _) => a.act.clone(),
            (Some(s), true) => format!("{}({s})", a.act),
            (Some(s), false) => format!("{}({s}={})", a.act, a.values.join("|")),
        })
        .collect();
    acts.join(" ")
}

pub fn parse_shorthand(domain: &str, line: &str) -> Result<Vec<DialogAct>, String> {
    let mut acts = Vec::new();
    for part in line.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, rest) = part.split_once(char::is_whitespace).unwrap_or((part, ""));
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_uppercase() || c == '_') {
            return Err(format!("`{name}` is not an act type"));
        }
        let mut a = DialogAct::new(domain, name);
        let rest = rest.trim();
        if !rest.is_empty() {
            let (slot, value) = match rest.split_once('=') {
                Some((s, v)) => (s.trim(), Some(v.trim())),
                None => (rest, None),
            };
            if slot.is_empty() || slot.contains(char::is_whitespace) {
                return Err(format!("bad slot in `{part}`"));
            }
            a = a.with_slot(slot);
            if let Some(v) = value {
                a.values = v.split('|').map(|x| x.trim().to_string()).collect();
            }
        }
        acts.push(a);
    }
    if acts.is_empty() {
        return Err("no acts".into());
    }
    Ok(acts)
}

pub fn chat<R: BufRead, W: Write>(config: &RunConfig, input: R, out: &mut W) -> anyhow::Result<()> {
    let schemas = load_schemas(config)?;
    let schema = match &config.service {
        Some(name) => find_schema(&schemas, name).ok_or_else(|| usage(format!("no schema for service `{name}`")))?,
        None => schemas.first().ok_or_else(|| usage("schema file has no services"))?,
    };
    let choice = config.backend_choice("rule")?;
    let gold = match &config.dialogues {
        Some(_) => load_dialogues(config)?,
        None => Vec::new(),
    };
    let db = SyntheticDb::generate(&schemas, config.seed.unwrap_or(0), DEFAULT_RECORDS_PER_DOMAIN);
    let service = schema.service_name.as_str();
    let interactive = std::io::stdin().is_terminal();

    let mut backend = match choice.build(&gold, config.timeout()) {
        Ok(b) => b,
        Err(e) => return Err(anyhow::Error::new(e).context("starting backend")),
    };
    let mut state = DialogState::new();
    let mut turn = 0;
    backend.begin_dialogue("chat");
    writeln!(out, "talking to {} about {service}. {HELP}", backend.name())?;
    let mut lines = input.lines();
    loop {
        if interactive {
            write!(out, "> ")?;
            out.flush()?;
        }
        let Some(line) = lines.next() else { break };
        let line = line.context("reading input")?;
        let line = line.trim();
        match line {
            "" => continue,
            "/quit" => break,
            "/help" => {
                writeln!(out, "{HELP}")?;
                continue;
            }
            "/state" => {
                write!(out, "{}", format_state(&state))?;
                continue;
            }
            "/reset" => {
                state = DialogState::new();
                turn = 0;
                backend.begin_dialogue("chat");
                writeln!(out, "(reset)")?;
                continue;
            }
            _ if line.starts_with('/') => {
                writeln!(out, "unknown command {line}. {HELP}")?;
                continue;
            }
            _ => {}
        }
        let utterance = match line.strip_prefix(':') {
            Some(short) => match parse_shorthand(service, short) {
                Ok(acts) => render_user_utterance(&acts),
                Err(e) => {
                    writeln!(out, "bad act shorthand: {e}")?;
                    continue;
                }
            },
            None => line.to_string(),
        };
        let id = request_id("chat", turn, service);
        match system_turn(&mut backend, &id, &state, &utterance, schema, Some(&db)) {
            Ok(t) => {
                if let Some((call, results)) = &t.call {
                    writeln!(out, "query: {} -> {} results", call.method, results.records.len())?;
                }
                write!(out, "{}", format_state(&t.parsed.state))?;
                writeln!(out, "user acts: {}", format_acts(&t.parsed.user_actions))?;
                writeln!(out, "system acts: {}", format_acts(&t.parsed.system_actions))?;
                writeln!(out, "system: {}", t.parsed.response)?;
                state = t.parsed.state;
                turn += 2;
            }
            Err(e) => writeln!(out, "backend error: {e}")?,
        }
    }
    Ok(())
}
