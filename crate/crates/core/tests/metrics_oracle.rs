mod common;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgtod_core::backends::{Backend, BackendError, OracleBackend, RuleAgent};
use sgtod_core::eval::{evaluate_corpus, ContextMode};
use sgtod_core::metrics::{aggregate, gleu, FrameEval, MetricRow, TurnBucket, METRIC_NAMES};
use sgtod_core::SplitTag;

use common::*;

const TOL: f64 = 1e-9;

fn assert_rows_close(got: [f64; 12], want: [f64; 12], what: &str) {
    for (i, name) in METRIC_NAMES.iter().enumerate() {
        assert!(
            (got[i] - want[i]).abs() <= TOL,
            "{what}: {name} = {} but oracle says {}",
            got[i],
            want[i]
        );
    }
}

#[test]
fn five_hundred_random_frames_match_the_oracle() {
    let frames = random_frames(2024, 500);
    let row = MetricRow::compute(&frames).unwrap();
    assert_rows_close(row.values(), bf_row(&frames), "500 frames");
    // The generator should exercise both hits and misses everywhere.
    for (name, v) in METRIC_NAMES.iter().zip(row.values()) {
        if *name != "combined" {
            assert!(v > 1.0 && v < 99.0, "{name} = {v} is degenerate");
        }
    }
}

#[test]
fn small_random_sets_match_the_oracle() {
    // Small sets hit the vacuous-denominator and all-skipped cases.
    for seed in 0..300 {
        let n = 1 + (seed as usize % 6);
        let frames = random_frames(seed, n);
        let row = MetricRow::compute(&frames).unwrap();
        assert_rows_close(row.values(), bf_row(&frames), &format!("seed {seed}"));
    }
}

#[test]
fn gleu_matches_the_oracle_on_random_pairs() {
    for f in random_frames(77, 2000) {
        let got = gleu(&f.pred_response, &f.gold_response);
        let want = bf_gleu(&f.pred_response, &f.gold_response);
        assert!(
            (got - want).abs() <= TOL,
            "{:?} vs {:?}",
            f.pred_response,
            f.gold_response
        );
    }
}

fn assert_ordering(row: &MetricRow, what: &str) {
    assert!(row.jga <= row.aga + TOL, "{what}: JGA {} > AGA {}", row.jga, row.aga);
    assert!(row.jaa <= row.aaa + TOL, "{what}: JAA {} > AAA {}", row.jaa, row.aaa);
    assert!(
        row.user_jaa <= row.user_aaa + TOL,
        "{what}: user JAA {} > user AAA {}",
        row.user_jaa,
        row.user_aaa
    );
}

#[test]
fn joint_never_exceeds_average_on_random_sets() {
    for seed in 0..400 {
        let frames = random_frames(10_000 + seed, 1 + seed as usize % 20);
        assert_ordering(&MetricRow::compute(&frames).unwrap(), &format!("seed {seed}"));
    }
}

fn corpus_frames(backend: &str, mode: ContextMode) -> Vec<FrameEval> {
    let dialogues = fixture_corpus();
    let make = || -> Result<Box<dyn Backend>, BackendError> {
        Ok(match backend {
            "oracle" => Box::new(OracleBackend::from_corpus(&dialogues)),
            _ => Box::new(RuleAgent::new()),
        })
    };
    evaluate_corpus(&dialogues, &schemas(), &split(), mode, 3, make)
        .unwrap()
        .frames
}

#[test]
fn joint_never_exceeds_average_on_fixture_runs() {
    for backend in ["oracle", "rule"] {
        for mode in [ContextMode::Predicted, ContextMode::Gold] {
            let frames = corpus_frames(backend, mode);
            let report = aggregate(&frames, &sgtod_core::metrics::DEFAULT_BUCKETS).unwrap();
            let what = format!("{backend} {mode:?}");
            assert_ordering(&report.all, &what);
            for row in report.seen.iter().chain(&report.unseen) {
                assert_ordering(row, &what);
            }
            for b in &report.buckets {
                if let Some(row) = &b.metrics {
                    assert_ordering(row, &what);
                }
            }
            assert_rows_close(report.all.values(), bf_row(&frames), &what);
        }
    }
}

fn shuffled(frames: &[FrameEval], seed: u64) -> Vec<FrameEval> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = frames.to_vec();
    out.shuffle(&mut rng);
    for f in &mut out {
        for frame in [
            &mut f.gold_user,
            &mut f.pred_user,
            &mut f.gold_system,
            &mut f.pred_system,
        ] {
            frame.acts.shuffle(&mut rng);
        }
        f.gold_state.slot_values.values_mut().for_each(|v| v.shuffle(&mut rng));
        f.pred_state.slot_values.values_mut().for_each(|v| v.shuffle(&mut rng));
    }
    out
}

#[test]
fn frame_and_tuple_order_do_not_matter() {
    let frames = random_frames(5, 300);
    let base = MetricRow::compute(&frames).unwrap().values();
    for seed in 0..10 {
        let again = MetricRow::compute(&shuffled(&frames, seed)).unwrap().values();
        for (i, name) in METRIC_NAMES.iter().enumerate() {
            assert!(
                (base[i] - again[i]).abs() <= 1e-12,
                "{name} moved under permutation {seed}"
            );
        }
    }
}

#[test]
fn bucket_and_split_rows_match_a_recount() {
    let frames = random_frames(99, 400);
    let buckets = TurnBucket::parse_list("1-3,4-7,8,9+").unwrap();
    let report = aggregate(&frames, &buckets).unwrap();
    for (b, row) in buckets.iter().zip(&report.buckets) {
        let inside: Vec<FrameEval> = frames
            .iter()
            .filter(|f| f.turn_count >= b.lo && b.hi.is_none_or(|hi| f.turn_count <= hi))
            .cloned()
            .collect();
        let ids: BTreeSet<&str> = inside.iter().map(|f| f.dialogue_id.as_str()).collect();
        assert_eq!(row.dialogues, ids.len(), "bucket {}", row.label);
        match &row.metrics {
            Some(m) => {
                assert_eq!(m.frames, inside.len());
                assert_rows_close(m.values(), bf_row(&inside), &row.label);
            }
            None => assert!(inside.is_empty()),
        }
    }
    for (tag, row) in [(SplitTag::Seen, &report.seen), (SplitTag::Unseen, &report.unseen)] {
        let part: Vec<FrameEval> = frames.iter().filter(|f| f.split == tag).cloned().collect();
        let row = row.as_ref().unwrap();
        assert_eq!(row.frames, part.len());
        assert_rows_close(row.values(), bf_row(&part), &format!("{tag:?}"));
    }
    assert_eq!(report.all.frames, frames.len());
}

#[test]
fn default_buckets_on_the_fixture_corpus_match_a_recount() {
    let frames = corpus_frames("oracle", ContextMode::Predicted);
    let report = aggregate(&frames, &sgtod_core::metrics::DEFAULT_BUCKETS).unwrap();
    let dialogues = fixture_corpus();
    let mut want = [0usize; 3];
    for d in &dialogues {
        let user_turns = d
            .turns
            .iter()
            .filter(|t| t.speaker == sgtod_core::Speaker::User)
            .count();
        let k = match user_turns {
            0..=5 => 0,
            6..=10 => 1,
            _ => 2,
        };
        want[k] += 1;
    }
    let got: Vec<usize> = report.buckets.iter().map(|b| b.dialogues).collect();
    assert_eq!(got, want);
}
