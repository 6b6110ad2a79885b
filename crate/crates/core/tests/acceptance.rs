//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgtod_core::backends::{Backend, BackendError, OracleBackend, RuleAgent};
use sgtod_core::corpus::{corpus_stats, dialogues_to_json, load_dialogue_path};
use sgtod_core::eval::{evaluate_corpus, ContextMode};
use sgtod_core::metrics::{aggregate, combined, sgdx_aggregate, MetricRow, DEFAULT_BUCKETS, METRIC_NAMES};
use sgtod_core::model::{act, normalize_value, DONTCARE};
use sgtod_core::serializer::{build_target, parse_generation, SEP};
use sgtod_core::simulator::{
    corpus_digest, run_dialog, sample_goal, sample_satisfiable_goal, synth_corpus, Outcome, SyntheticDb,
    DEFAULT_MAX_TURNS,
};
use sgtod_core::variants::{surface_variant, SchemaMapping};
use sgtod_core::{ActionFrame, ActiveIntent, DialogAct, DialogState, Dialogue, SlotRef};
use sha2::{Digest, Sha256};

use common::*;

const COMBINED_TOL: f64 = 0.01;
const ORACLE_TOL: f64 = 1e-9;
const ORDER_TOL: f64 = 1e-9;
/// Spread allowed on structural metrics across renamed schemas.
const SGDX_STD_TOL: f64 = 1e-9;

const SYNTHETIC_DIGEST: &str = "303be326386f5cc9d5bdce2d4db19d598da0dcd9cfca50d07f43815a9e95f2f9";
const RULE_REPORT_DIGEST: &str = "eb52ee35bdc0a913060daa4b2ef9dc57e009371681ccf6f186e00a7e0d8d6dc1";

type Verdict = Result<String, String>;
type Criterion = (&'static str, Option<Duration>, fn() -> Verdict);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn combined_formula() -> Verdict {
    let rows = [
        ("all", 73.08, 62.19, 20.04, 87.67),
        ("seen", 74.72, 63.85, 24.66, 93.95),
        ("unseen", 71.68, 61.63, 18.51, 85.16),
    ];
    for (name, inform, success, gleu, want) in rows {
        let got = combined(inform, success, gleu);
        check((got - want).abs() <= COMBINED_TOL, || {
            format!("{name}: {got:.4} vs {want}")
        })?;
    }
    Ok("3 rows within 0.01".into())
}

fn oracle_calibration() -> Verdict {
    let dialogues = fixture_corpus();
    let schemas = schemas();
    let stats = corpus_stats(&dialogues, &schemas);
    check(stats.dialogues >= 20 && stats.domains.len() >= 3, || {
        format!(
            "fixture too small: {} dialogues, {} domains",
            stats.dialogues,
            stats.domains.len()
        )
    })?;
    let make = || -> Result<Box<dyn Backend>, BackendError> { Ok(Box::new(OracleBackend::from_corpus(&dialogues))) };
    let run =
        evaluate_corpus(&dialogues, &schemas, &split(), ContextMode::Predicted, 2, make).map_err(|e| e.to_string())?;
    check(run.failures.is_empty(), || {
        format!("{} backend failures", run.failures.len())
    })?;
    let report = aggregate(&run.frames, &DEFAULT_BUCKETS).map_err(|e| e.to_string())?;
    for (name, v) in METRIC_NAMES.iter().zip(report.all.values()) {
        if *name == "combined" {
            check(v == 200.0, || format!("combined = {v}"))?;
        } else {
            check(v == 100.0, || format!("{name} = {v}"))?;
        }
    }
    Ok(format!(
        "{} dialogues, {} frames, every metric 100",
        stats.dialogues, report.all.frames
    ))
}

fn metric_oracle_equivalence() -> Verdict {
    let frames = random_frames(2024, 500);
    let got = MetricRow::compute(&frames).map_err(|e| e.to_string())?.values();
    let want = bf_row(&frames);
    let mut worst: f64 = 0.0;
    for (i, name) in METRIC_NAMES.iter().enumerate() {
        let diff = (got[i] - want[i]).abs();
        check(diff <= ORACLE_TOL, || format!("{name}: {} vs {}", got[i], want[i]))?;
        worst = worst.max(diff);
    }
    Ok(format!("500 frames, max diff {worst:.1e}"))
}

fn ordered(row: &MetricRow) -> bool {
    row.jga <= row.aga + ORDER_TOL && row.jaa <= row.aaa + ORDER_TOL && row.user_jaa <= row.user_aaa + ORDER_TOL
}

fn ordering_invariants() -> Verdict {
    let mut rows = 0;
    for seed in 0..200 {
        let frames = random_frames(10_000 + seed, 1 + seed as usize % 20);
        let row = MetricRow::compute(&frames).map_err(|e| e.to_string())?;
        check(ordered(&row), || format!("random set {seed}"))?;
        rows += 1;
    }
    let dialogues = fixture_corpus();
    let schemas = schemas();
    for backend in ["oracle", "rule"] {
        for mode in [ContextMode::Predicted, ContextMode::Gold] {
            let make = || -> Result<Box<dyn Backend>, BackendError> {
                Ok(match backend {
                    "oracle" => Box::new(OracleBackend::from_corpus(&dialogues)),
                    _ => Box::new(RuleAgent::new()),
                })
            };
            let run = evaluate_corpus(&dialogues, &schemas, &split(), mode, 2, make).map_err(|e| e.to_string())?;
            let report = aggregate(&run.frames, &DEFAULT_BUCKETS).map_err(|e| e.to_string())?;
            let all = std::iter::once(&report.all)
                .chain(&report.seen)
                .chain(&report.unseen)
                .chain(report.buckets.iter().filter_map(|b| b.metrics.as_ref()));
            for row in all {
                check(ordered(row), || format!("{backend} {mode:?}"))?;
                rows += 1;
            }
        }
    }
    Ok(format!("{rows} rows"))
}

const TRICKY: [char; 11] = ['a', 'b', ' ', '<', '>', '\\', '\n', '\r', SEP, 'é', '|'];

fn text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(0..7);
    if rng.gen_bool(0.2) {
        (0..n).map(|_| rng.gen::<char>()).collect()
    } else {
        (0..n).map(|_| TRICKY[rng.gen_range(0..TRICKY.len())]).collect()
    }
}

fn non_empty(rng: &mut ChaCha8Rng) -> String {
    loop {
        let s = text(rng);
        if !s.is_empty() {
            return s;
        }
    }
}

fn random_state(rng: &mut ChaCha8Rng) -> DialogState {
    let mut state = DialogState {
        active_intent: ActiveIntent::from_sgd(&text(rng)),
        ..DialogState::default()
    };
    for _ in 0..rng.gen_range(0..5) {
        let values = (0..rng.gen_range(1..3)).map(|_| text(rng)).collect();
        state.slot_values.insert(SlotRef::new(text(rng), text(rng)), values);
    }
    for _ in 0..rng.gen_range(0..3) {
        state.requested_slots.insert(SlotRef::new(text(rng), text(rng)));
    }
    state
}

fn random_acts(rng: &mut ChaCha8Rng) -> Vec<DialogAct> {
    (0..rng.gen_range(0..5))
        .map(|_| DialogAct {
            domain: text(rng),
            act: non_empty(rng),
            slot: if rng.gen_bool(0.7) { Some(non_empty(rng)) } else { None },
            values: (0..rng.gen_range(0..3)).map(|_| text(rng)).collect(),
        })
        .collect()
}

fn serialization_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for i in 0..1000 {
        let state = random_state(&mut rng);
        let user = ActionFrame::user(random_acts(&mut rng));
        let system = ActionFrame::system(random_acts(&mut rng));
        let response = text(&mut rng);
        let target = build_target(&state, &user, &system, &response);
        let parsed = parse_generation(&target.text, &[]);
        check(parsed.parse_warnings.is_empty(), || {
            format!("case {i}: {:?}", parsed.parse_warnings)
        })?;
        check(
            parsed.state == state
                && parsed.user_actions == user
                && parsed.system_actions == system
                && parsed.response == response,
            || format!("case {i}: {:?}", target.text),
        )?;
    }
    Ok("1000 triples, zero warnings".into())
}

fn context_size() -> Verdict {
    let mut checked = 0;
    let mut ratio_sum = 0.0;
    for d in fixture_corpus() {
        if d.exchanges().count() < 3 {
            continue;
        }
        let pairs = context_pairs(&d);
        let last = pairs.iter().map(|p| p.0).max().unwrap_or(0);
        for (_, summarized, full, id) in pairs.iter().filter(|p| p.0 == last) {
            check(summarized < full, || format!("{id}: {summarized} >= {full}"))?;
            ratio_sum += *summarized as f64 / *full as f64;
            checked += 1;
        }
    }
    check(checked > 0, || "no dialogue with 3 exchanges".into())?;
    Ok(format!(
        "{checked} dialogues, mean size ratio {:.2}",
        ratio_sum / checked as f64
    ))
}

fn rule_determinism_and_invariance() -> Verdict {
    let base = schemas();
    let synth = synth_corpus(&base, 24, 7).map_err(|e| e.to_string())?;
    let on_disk = load_dialogue_path(&fixtures().join("synthetic")).map_err(|e| e.to_string())?;
    check(corpus_digest(&synth.dialogues) == SYNTHETIC_DIGEST, || {
        "transcript digest moved".into()
    })?;
    check(
        dialogues_to_json(&on_disk) == dialogues_to_json(&synth.dialogues),
        || "fixture differs".into(),
    )?;

    let dialogues = fixture_corpus();
    let split = split();
    let json = rule_report(&dialogues, &base, &split, 1).to_json();
    check(
        hex::encode(Sha256::digest(json.as_bytes())) == RULE_REPORT_DIGEST,
        || "report digest moved".into(),
    )?;
    check(rule_report(&dialogues, &base, &split, 4).to_json() == json, || {
        "threaded run differs".into()
    })?;

    let mut reports = BTreeMap::new();
    for level in 1..=3 {
        let variant = surface_variant(&base, level);
        let renamed = synth_corpus(&variant, 24, 7).map_err(|e| e.to_string())?;
        for (a, b) in synth.simulated.iter().zip(&renamed.simulated) {
            check(a.system_act_types() == b.system_act_types(), || {
                format!("level {level}: {} acts changed", a.dialogue.dialogue_id)
            })?;
        }
        let mapping = SchemaMapping::between(&base, &variant, level).map_err(|e| e.to_string())?;
        let mapped: Vec<Dialogue> = dialogues.iter().map(|d| mapping.dialogue(d)).collect();
        reports.insert(level, rule_report(&mapped, &variant, &split, 2));
    }
    let summary = sgdx_aggregate(&reports).map_err(|e| e.to_string())?;
    for name in ["AAA", "JAA", "user_AAA", "user_JAA"] {
        let std = summary.metrics[name].std;
        check(std <= SGDX_STD_TOL, || format!("{name} std {std}"))?;
    }
    Ok("digests pinned, 3 renamed variants, action std 0".into())
}

fn simulator_completion() -> Verdict {
    let schemas: Vec<_> = schemas().into_iter().take(3).collect();
    let db = SyntheticDb::generate(&schemas, 5, 10);
    let mut turns = 0;
    for seed in 0..200u64 {
        let schema = &schemas[seed as usize % 3];
        let goal = sample_satisfiable_goal(schema, &db, seed).map_err(|e| e.to_string())?;
        let sim = run_dialog(
            &format!("g{seed}"),
            schema,
            &goal,
            &mut RuleAgent::new(),
            &db,
            DEFAULT_MAX_TURNS,
        )
        .map_err(|e| e.to_string())?;
        let notified = sim
            .predictions
            .iter()
            .any(|p| p.system_actions.contains(act::NOTIFY_SUCCESS) || p.system_actions.contains(act::NOTIFY_FAILURE));
        check(
            notified && matches!(sim.outcome, Outcome::Success | Outcome::Failure),
            || format!("goal {seed} never notified"),
        )?;
        check(sim.exchanges() <= DEFAULT_MAX_TURNS, || {
            format!("goal {seed}: {} turns", sim.exchanges())
        })?;
        turns = turns.max(sim.exchanges());
    }

    // Brute-force filter over the raw records.
    let mut queries = 0;
    for seed in 0..300u64 {
        let schema = &schemas[seed as usize % 3];
        let goal = sample_goal(schema, seed).map_err(|e| e.to_string())?;
        let mut state = DialogState::with_intent(goal.intent.clone());
        for (i, (slot, value)) in goal.constraints.iter().enumerate() {
            if (seed as usize + i).is_multiple_of(2) {
                state.set_slot(SlotRef::new(&schema.service_name, slot), vec![value.clone()]);
            }
        }
        let intent = schema.intent(&goal.intent).expect("sampled intent exists");
        let mut want = Vec::new();
        for record in db.records(&schema.service_name) {
            let keep = state
                .slot_values
                .iter()
                .all(|(k, vs)| vs[0] == DONTCARE || normalize_value(&record[&k.slot]) == normalize_value(&vs[0]));
            if keep {
                want.push(
                    intent
                        .result_slots
                        .iter()
                        .map(|s| (s.clone(), record[s].clone()))
                        .collect::<BTreeMap<_, _>>(),
                );
            }
        }
        check(db.query(&schema.service_name, &state).records == want, || {
            format!("query {seed}")
        })?;
        queries += 1;
    }
    Ok(format!(
        "200 goals notified, longest {turns} turns, {queries} queries match"
    ))
}

fn sgd_ingestion() -> Verdict {
    if let Ok(root) = std::env::var("SGD_DIR") {
        let (dialogues, domains) = ingest_release(Path::new(&root));
        check(dialogues >= 16_000 && domains.len() >= 20, || {
            format!("{dialogues} dialogues, {} domains", domains.len())
        })?;
        return Ok(format!("release: {dialogues} dialogues, {} domains", domains.len()));
    }
    let schemas = schemas();
    let mut total = 0;
    for path in [fixtures().join("dialogues_001.json"), fixtures().join("synthetic")] {
        let dialogues = load_dialogue_path(&path).map_err(|e| e.to_string())?;
        let stats = corpus_stats(&dialogues, &schemas);
        let want = recount(&path);
        check(
            stats.dialogues == want.dialogues
                && stats.turns == want.turns
                && stats.user_turns == want.user_turns
                && stats.frames == want.frames
                && stats.services == want.services
                && stats.domains == want.domains,
            || format!("{} counts differ from recount", path.display()),
        )?;
        check(stats.warnings.is_empty(), || format!("{:?}", stats.warnings))?;
        total += stats.dialogues;
    }
    Ok(format!("SGD_DIR unset; fixture recount matches on {total} dialogues"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("combined score formula", None, combined_formula),
        ("oracle calibration", Some(Duration::from_secs(5)), oracle_calibration),
        (
            "metric oracle equivalence",
            Some(Duration::from_secs(10)),
            metric_oracle_equivalence,
        ),
        ("ordering invariants", None, ordering_invariants),
        (
            "serialization round trip",
            Some(Duration::from_secs(5)),
            serialization_round_trip,
        ),
        ("context size", None, context_size),
        (
            "rule determinism and schema invariance",
            None,
            rule_determinism_and_invariance,
        ),
        (
            "simulator goal completion",
            Some(Duration::from_secs(30)),
            simulator_completion,
        ),
        ("sgd ingestion", None, sgd_ingestion),
    ];
    let total = criteria.len();
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = match (result, budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.2?}, budget {b:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS {name}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} ({elapsed:.2?})");
            }
        }
    }
    println!("{} of {total} criteria passed", total - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
