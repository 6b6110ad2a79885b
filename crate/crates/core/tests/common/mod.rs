//! Fixtures, random frame generation and brute-force metric oracles shared
//! by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use sgtod_core::backends::{Backend, BackendError, RuleAgent};
use sgtod_core::corpus::{corpus_stats, dialogue_files, load_dialogue_path, CorpusStats};
use sgtod_core::eval::{evaluate_corpus, gold_turns, ContextMode};
use sgtod_core::metrics::{aggregate, EvalReport, FrameEval, DEFAULT_BUCKETS};
use sgtod_core::model::act;
use sgtod_core::schema::{find_schema, load_schema_path};
use sgtod_core::serializer::{baseline::build_history_context, build_context};
use sgtod_core::{
    ActionFrame, ActiveIntent, DialogAct, DialogState, Dialogue, DomainSchema, DomainSplit, SlotRef, Speaker, SplitTag,
};
use unicode_normalization::UnicodeNormalization;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn schemas() -> Vec<DomainSchema> {
    load_schema_path(&fixtures().join("schema.json")).unwrap()
}

pub fn split() -> DomainSplit {
    DomainSplit::load(&fixtures().join("split.json")).unwrap()
}

pub fn hand_written() -> Vec<Dialogue> {
    load_dialogue_path(&fixtures().join("dialogues_001.json")).unwrap()
}

pub fn synthetic() -> Vec<Dialogue> {
    load_dialogue_path(&fixtures().join("synthetic")).unwrap()
}

/// Every fixture dialogue: the hand-written ones, then the synthetic ones.
pub fn fixture_corpus() -> Vec<Dialogue> {
    let mut all = hand_written();
    all.extend(synthetic());
    all
}

// ---- random frames ----

const DOMAINS: [&str; 2] = ["Alpha_1", "Beta_1"];
const SLOTS: [&str; 4] = ["s0", "s1", "s2", "s3"];
/// Includes case, spacing and composition variants of the same value.
const VALUES: [&str; 8] = ["x", "X", " x ", "y", "z", "caf\u{e9}", "cafe\u{301}", "dontcare"];
const INTENTS: [&str; 3] = ["NONE", "Find", "Book"];
const ACTS: [&str; 8] = [
    act::INFORM,
    act::INFORM_COUNT,
    act::REQUEST,
    act::OFFER,
    act::CONFIRM,
    act::NOTIFY_SUCCESS,
    act::GOODBYE,
    act::SELECT,
];
const WORDS: [&str; 9] = ["the", "table", "is", "booked", ",", "at", "noon", "!", "ok"];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).unwrap()
}

fn values(rng: &mut ChaCha8Rng, max: usize) -> Vec<String> {
    let n = rng.gen_range(0..=max);
    (0..n).map(|_| pick(rng, &VALUES).to_string()).collect()
}

fn state(rng: &mut ChaCha8Rng) -> DialogState {
    let mut s = DialogState {
        active_intent: ActiveIntent::from_sgd(pick(rng, &INTENTS)),
        ..Default::default()
    };
    for _ in 0..rng.gen_range(0..5) {
        let v = values(rng, 2);
        if !v.is_empty() {
            s.set_slot(SlotRef::new(pick(rng, &DOMAINS), pick(rng, &SLOTS)), v);
        }
    }
    for _ in 0..rng.gen_range(0..3) {
        s.requested_slots
            .insert(SlotRef::new(pick(rng, &DOMAINS), pick(rng, &SLOTS)));
    }
    s
}

fn dialog_act(rng: &mut ChaCha8Rng) -> DialogAct {
    let mut a = DialogAct::new(pick(rng, &DOMAINS), pick(rng, &ACTS));
    if rng.gen_bool(0.8) {
        a = a.with_slot(pick(rng, &SLOTS));
        a.values = values(rng, 2);
    }
    a
}

fn acts(rng: &mut ChaCha8Rng) -> Vec<DialogAct> {
    (0..rng.gen_range(0..5)).map(|_| dialog_act(rng)).collect()
}

/// A copy of `gold` with some entries dropped, some replaced and some added.
fn perturb_acts(rng: &mut ChaCha8Rng, gold: &[DialogAct]) -> Vec<DialogAct> {
    let mut out = Vec::new();
    for a in gold {
        if rng.gen_bool(0.8) {
            out.push(if rng.gen_bool(0.15) { dialog_act(rng) } else { a.clone() });
        }
    }
    if rng.gen_bool(0.3) {
        out.push(dialog_act(rng));
    }
    out.shuffle(rng);
    out
}

fn perturb_state(rng: &mut ChaCha8Rng, gold: &DialogState) -> DialogState {
    if rng.gen_bool(0.15) {
        return state(rng);
    }
    let mut s = gold.clone();
    if rng.gen_bool(0.2) {
        s.active_intent = ActiveIntent::from_sgd(pick(rng, &INTENTS));
    }
    let keys: Vec<SlotRef> = s.slot_values.keys().cloned().collect();
    for k in keys {
        match rng.gen_range(0..6) {
            0 => {
                s.slot_values.remove(&k);
            }
            1 => {
                s.slot_values.insert(k, vec![pick(rng, &VALUES).to_string()]);
            }
            _ => {}
        }
    }
    if rng.gen_bool(0.2) {
        s.set_slot(
            SlotRef::new(pick(rng, &DOMAINS), pick(rng, &SLOTS)),
            vec![pick(rng, &VALUES).into()],
        );
    }
    if rng.gen_bool(0.2) {
        s.requested_slots
            .insert(SlotRef::new(pick(rng, &DOMAINS), pick(rng, &SLOTS)));
    }
    s
}

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(0..8);
    (0..n).map(|_| pick(rng, &WORDS)).collect::<Vec<_>>().join(" ")
}

fn perturb_sentence(rng: &mut ChaCha8Rng, gold: &str) -> String {
    if rng.gen_bool(0.2) {
        return sentence(rng);
    }
    gold.split(' ')
        .filter(|_| rng.gen_bool(0.85))
        .collect::<Vec<_>>()
        .join(" ")
}

/// A random gold frame and a prediction that is often close to it.
pub fn random_frame(rng: &mut ChaCha8Rng, i: usize) -> FrameEval {
    let gold_state = state(rng);
    let gold_user = acts(rng);
    let gold_system = acts(rng);
    let gold_response = sentence(rng);
    let turn_count = rng.gen_range(1..15);
    FrameEval {
        dialogue_id: format!("r{}", i / 4),
        turn_id: format!("r{}/{}", i / 4, i % 4),
        service: pick(rng, &DOMAINS).to_string(),
        split: if rng.gen_bool(0.5) {
            SplitTag::Seen
        } else {
            SplitTag::Unseen
        },
        turn_count,
        pred_state: perturb_state(rng, &gold_state),
        pred_user: ActionFrame::user(perturb_acts(rng, &gold_user)),
        pred_system: ActionFrame::system(perturb_acts(rng, &gold_system)),
        pred_response: perturb_sentence(rng, &gold_response),
        gold_state,
        gold_user: ActionFrame::user(gold_user),
        gold_system: ActionFrame::system(gold_system),
        gold_response,
    }
}

pub fn random_frames(seed: u64, n: usize) -> Vec<FrameEval> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| random_frame(&mut rng, i)).collect()
}

// ---- brute-force oracles ----
//
// Written from the metric definitions with linear scans and plain sums,
// sharing no code with the library beyond its data types.

fn norm(v: &str) -> String {
    let composed: String = v.nfc().collect();
    let lower = composed.to_lowercase();
    let mut words = Vec::new();
    for w in lower.split_whitespace() {
        words.push(w);
    }
    words.join(" ")
}

fn any_of(pred: &[String], gold: &[String]) -> bool {
    if pred.is_empty() && gold.is_empty() {
        return true;
    }
    for p in pred {
        for g in gold {
            if norm(p) == norm(g) {
                return true;
            }
        }
    }
    false
}

fn plain_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 1.0;
    }
    let mut total = 0.0;
    for x in xs {
        total += x;
    }
    total / xs.len() as f64
}

fn frac(hits: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        hits as f64 / total as f64
    }
}

pub fn bf_intent(frames: &[FrameEval]) -> f64 {
    let mut hits = 0;
    for f in frames {
        if f.pred_state.active_intent.as_sgd() == f.gold_state.active_intent.as_sgd() {
            hits += 1;
        }
    }
    frac(hits, frames.len())
}

pub fn bf_requested_f1(frames: &[FrameEval]) -> f64 {
    let mut scores = Vec::new();
    for f in frames {
        let p: Vec<&SlotRef> = f.pred_state.requested_slots.iter().collect();
        let g: Vec<&SlotRef> = f.gold_state.requested_slots.iter().collect();
        if p.is_empty() && g.is_empty() {
            scores.push(1.0);
            continue;
        }
        let tp = p.iter().filter(|x| g.contains(x)).count() as f64;
        scores.push(2.0 * tp / (p.len() + g.len()) as f64);
    }
    plain_mean(&scores)
}

/// `(average, joint)` from per-frame `(hits, gold, spurious)` counts.
fn average_joint(rows: &[(usize, usize, bool)]) -> (f64, f64) {
    let mut averages = Vec::new();
    let (mut joint_hits, mut joint_total) = (0, 0);
    for &(hits, gold, spurious) in rows {
        if gold == 0 && !spurious {
            continue;
        }
        joint_total += 1;
        if gold > 0 {
            averages.push(hits as f64 / gold as f64);
        }
        if hits == gold && !spurious {
            joint_hits += 1;
        }
    }
    (plain_mean(&averages), frac(joint_hits, joint_total))
}

pub fn bf_goal(frames: &[FrameEval]) -> (f64, f64) {
    let mut rows = Vec::new();
    for f in frames {
        let gold: Vec<(&SlotRef, &Vec<String>)> = f.gold_state.slot_values.iter().collect();
        let pred: Vec<(&SlotRef, &Vec<String>)> = f.pred_state.slot_values.iter().collect();
        let mut hits = 0;
        for (gk, gv) in &gold {
            if pred.iter().any(|(pk, pv)| pk == gk && any_of(pv, gv)) {
                hits += 1;
            }
        }
        let spurious = pred.iter().any(|(pk, _)| !gold.iter().any(|(gk, _)| gk == pk));
        rows.push((hits, gold.len(), spurious));
    }
    average_joint(&rows)
}

fn same_act(p: &DialogAct, g: &DialogAct) -> bool {
    p.domain == g.domain && p.act == g.act && p.slot == g.slot && any_of(&p.values, &g.values)
}

fn value_set(a: &DialogAct) -> BTreeSet<String> {
    a.values.iter().map(|v| norm(v)).collect()
}

/// Gold acts with duplicates (same tuple up to value normalization) removed.
fn unique(acts: &[DialogAct]) -> Vec<DialogAct> {
    let mut kept: Vec<DialogAct> = Vec::new();
    for a in acts {
        let dup = kept
            .iter()
            .any(|k| k.domain == a.domain && k.act == a.act && k.slot == a.slot && value_set(k) == value_set(a));
        if !dup {
            kept.push(a.clone());
        }
    }
    kept
}

pub fn bf_actions(frames: &[FrameEval], user: bool) -> (f64, f64) {
    let mut rows = Vec::new();
    for f in frames {
        let (gold, pred) = if user {
            (&f.gold_user.acts, &f.pred_user.acts)
        } else {
            (&f.gold_system.acts, &f.pred_system.acts)
        };
        let gold = unique(gold);
        let hits = gold.iter().filter(|g| pred.iter().any(|p| same_act(p, g))).count();
        let spurious = pred.iter().any(|p| !gold.iter().any(|g| same_act(p, g)));
        rows.push((hits, gold.len(), spurious));
    }
    average_joint(&rows)
}

pub fn bf_inform_success(frames: &[FrameEval]) -> (f64, f64) {
    let (mut ih, mut it, mut sh, mut st) = (0, 0, 0, 0);
    for f in frames {
        for g in unique(&f.gold_system.acts) {
            let hit = f.pred_system.acts.iter().any(|p| same_act(p, &g));
            if g.act == act::INFORM || g.act == act::INFORM_COUNT {
                it += 1;
                if hit {
                    ih += 1;
                }
            }
            if let Some(slot) = &g.slot {
                if f.gold_state.requested_slots.contains(&SlotRef::new(&g.domain, slot)) {
                    st += 1;
                    if hit {
                        sh += 1;
                    }
                }
            }
        }
    }
    (100.0 * frac(ih, it), 100.0 * frac(sh, st))
}

fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.to_lowercase().chars() {
        if c.is_whitespace() {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
        } else if c.is_alphanumeric() {
            word.push(c);
        } else {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            out.push(c.to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

fn all_ngrams(t: &[String]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for n in 1..=4 {
        if t.len() < n {
            continue;
        }
        for i in 0..=t.len() - n {
            out.push(t[i..i + n].to_vec());
        }
    }
    out
}

pub fn bf_gleu(pred: &str, gold: &str) -> f64 {
    let (p, g) = (tokens(pred), tokens(gold));
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    if p.is_empty() || g.is_empty() {
        return 0.0;
    }
    let (pn, gn) = (all_ngrams(&p), all_ngrams(&g));
    let mut distinct: Vec<&Vec<String>> = Vec::new();
    for x in &pn {
        if !distinct.contains(&x) {
            distinct.push(x);
        }
    }
    let mut matched = 0;
    for d in distinct {
        let in_p = pn.iter().filter(|x| *x == d).count();
        let in_g = gn.iter().filter(|x| *x == d).count();
        matched += in_p.min(in_g);
    }
    let precision = matched as f64 / pn.len() as f64;
    let recall = matched as f64 / gn.len() as f64;
    if precision < recall {
        precision
    } else {
        recall
    }
}

/// Every report column, in report order and on the report's 0–100 scale.
pub fn bf_row(frames: &[FrameEval]) -> [f64; 12] {
    let (aga, jga) = bf_goal(frames);
    let (inform, success) = bf_inform_success(frames);
    let (aaa, jaa) = bf_actions(frames, false);
    let (uaaa, ujaa) = bf_actions(frames, true);
    let scores: Vec<f64> = frames
        .iter()
        .map(|f| bf_gleu(&f.pred_response, &f.gold_response))
        .collect();
    let gleu = 100.0 * plain_mean(&scores);
    [
        100.0 * bf_intent(frames),
        100.0 * bf_requested_f1(frames),
        100.0 * aga,
        100.0 * jga,
        inform,
        success,
        100.0 * aaa,
        100.0 * jaa,
        100.0 * uaaa,
        100.0 * ujaa,
        gleu,
        (inform + success) / 2.0 + gleu,
    ]
}

// ---- corpus-level helpers ----

/// Counts taken straight from the raw JSON, without the library's parser.
pub fn recount(path: &Path) -> CorpusStats {
    let mut stats = CorpusStats::default();
    let mut files: Vec<_> = if path.is_dir() {
        std::fs::read_dir(path)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| {
                let name = p.file_name().unwrap().to_string_lossy();
                name.starts_with("dialogues_") && name.ends_with(".json")
            })
            .collect()
    } else {
        vec![path.to_path_buf()]
    };
    files.sort();
    for file in files {
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(file).unwrap()).unwrap();
        for d in doc.as_array().unwrap() {
            stats.dialogues += 1;
            for s in d["services"].as_array().unwrap() {
                let s = s.as_str().unwrap();
                *stats.services.entry(s.to_string()).or_default() += 1;
                let domain = match s.rsplit_once('_') {
                    Some((head, tail)) if tail.chars().all(|c| c.is_ascii_digit()) => head,
                    _ => s,
                };
                stats.domains.insert(domain.to_string());
            }
            for t in d["turns"].as_array().unwrap() {
                stats.turns += 1;
                if t["speaker"] == "USER" {
                    stats.user_turns += 1;
                }
                stats.frames += t["frames"].as_array().unwrap().len();
            }
        }
    }
    stats
}

pub fn assert_counts_match(got: &CorpusStats, want: &CorpusStats) {
    assert_eq!(got.dialogues, want.dialogues);
    assert_eq!(got.turns, want.turns);
    assert_eq!(got.user_turns, want.user_turns);
    assert_eq!(got.frames, want.frames);
    assert_eq!(got.services, want.services);
    assert_eq!(got.domains, want.domains);
}

/// Dialogue count and domains of a full release laid out as `train/`,
/// `dev/` and `test/`.
pub fn ingest_release(root: &Path) -> (usize, BTreeSet<String>) {
    let mut dialogues = 0;
    let mut domains = BTreeSet::new();
    for split in ["train", "dev", "test"] {
        let dir = root.join(split);
        let schemas = load_schema_path(&dir).unwrap();
        assert!(!dialogue_files(&dir).unwrap().is_empty());
        let corpus = load_dialogue_path(&dir).unwrap();
        let stats = corpus_stats(&corpus, &schemas);
        dialogues += stats.dialogues;
        domains.extend(stats.domains);
    }
    (dialogues, domains)
}

/// Summarized and full-history contexts of every user frame at or after the
/// third exchange.
pub fn context_pairs(d: &Dialogue) -> Vec<(usize, usize, usize, String)> {
    let schemas = schemas();
    let types = act::system_act_types();
    let mut out = Vec::new();
    for gold in gold_turns(d) {
        let exchange = gold.turn_index / 2;
        if exchange < 2 {
            continue;
        }
        let schema: Vec<_> = find_schema(&schemas, &gold.service).into_iter().cloned().collect();
        let history: Vec<(Speaker, String)> = d.turns[..gold.turn_index]
            .iter()
            .map(|t| (t.speaker, t.utterance.clone()))
            .collect();
        let summarized = build_context(&gold.prev_state, &gold.utterance, &schema, gold.db.as_ref(), &types);
        let full = build_history_context(&history, &gold.utterance, &schema, gold.db.as_ref(), &types);
        out.push((gold.turn_index, summarized.text.len(), full.len(), gold.id.clone()));
    }
    out
}

/// The rule agent's predicted-context report over a corpus.
pub fn rule_report(
    dialogues: &[Dialogue],
    schemas: &[DomainSchema],
    split: &DomainSplit,
    workers: usize,
) -> EvalReport {
    let make = || -> Result<Box<dyn Backend>, BackendError> { Ok(Box::new(RuleAgent::new())) };
    let run = evaluate_corpus(dialogues, schemas, split, ContextMode::Predicted, workers, make).unwrap();
    let mut report = aggregate(&run.frames, &DEFAULT_BUCKETS).unwrap();
    report.backend_requests = run.requests;
    report.backend_failures = run.failed_requests;
    report
}
