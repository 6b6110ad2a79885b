use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    action_accuracy, combined, goal_accuracy, inform_success, intent_accuracy, mean_gleu, pairwise_sum,
    requested_slots_f1, FrameEval, MetricError,
};
use crate::corpus::SplitTag;
use crate::model::Speaker;

/// Column names, in table order.
pub const METRIC_NAMES: [&str; 12] = [
    "intent_accuracy",
    "requested_slots_f1",
    "AGA",
    "JGA",
    "inform",
    "success",
    "AAA",
    "JAA",
    "user_AAA",
    "user_JAA",
    "GLEU",
    "combined",
];

/// One row of the report. Every value is on a 0–100 scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub frames: usize,
    pub intent_accuracy: f64,
    pub requested_slots_f1: f64,
    #[serde(rename = "AGA")]
    pub aga: f64,
    #[serde(rename = "JGA")]
    pub jga: f64,
    pub inform: f64,
    pub success: f64,
    #[serde(rename = "AAA")]
    pub aaa: f64,
    #[serde(rename = "JAA")]
    pub jaa: f64,
    #[serde(rename = "user_AAA")]
    pub user_aaa: f64,
    #[serde(rename = "user_JAA")]
    pub user_jaa: f64,
    #[serde(rename = "GLEU")]
    pub gleu: f64,
    pub combined: f64,
}

impl MetricRow {
    pub fn compute(frames: &[FrameEval]) -> Result<Self, MetricError> {
        let (aga, jga) = goal_accuracy(frames)?;
        let (inform, success) = inform_success(frames)?;
        let (aaa, jaa) = action_accuracy(frames, Speaker::System)?;
        let (user_aaa, user_jaa) = action_accuracy(frames, Speaker::User)?;
        let gleu = 100.0 * mean_gleu(frames)?;
        Ok(MetricRow {
            frames: frames.len(),
            intent_accuracy: 100.0 * intent_accuracy(frames)?,
            requested_slots_f1: 100.0 * requested_slots_f1(frames)?,
            aga: 100.0 * aga,
            jga: 100.0 * jga,
            inform,
            success,
            aaa: 100.0 * aaa,
            jaa: 100.0 * jaa,
            user_aaa: 100.0 * user_aaa,
            user_jaa: 100.0 * user_jaa,
            gleu,
            combined: combined(inform, success, gleu),
        })
    }

    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [f64; 12] {
        [
            self.intent_accuracy,
            self.requested_slots_f1,
            self.aga,
            self.jga,
            self.inform,
            self.success,
            self.aaa,
            self.jaa,
            self.user_aaa,
            self.user_jaa,
            self.gleu,
            self.combined,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        METRIC_NAMES.iter().position(|n| *n == name).map(|i| self.values()[i])
    }
}

/// Inclusive range of dialogue lengths in user turns; `hi = None` is open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnBucket {
    pub lo: usize,
    pub hi: Option<usize>,
}

impl TurnBucket {
    pub fn contains(&self, turns: usize) -> bool {
        turns >= self.lo && self.hi.is_none_or(|hi| turns <= hi)
    }

    /// Parses a comma-separated list such as `1-5,6-10,11+`.
    pub fn parse_list(s: &str) -> Result<Vec<TurnBucket>, MetricError> {
        s.split(',').map(|b| b.trim().parse()).collect()
    }
}

pub const DEFAULT_BUCKETS: [TurnBucket; 3] = [
    TurnBucket { lo: 1, hi: Some(5) },
    TurnBucket { lo: 6, hi: Some(10) },
    TurnBucket { lo: 11, hi: None },
];

impl FromStr for TurnBucket {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, MetricError> {
        let bad = || MetricError::BadBucket(s.to_string());
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        if let Some(lo) = s.strip_suffix('+') {
            return Ok(TurnBucket { lo: num(lo)?, hi: None });
        }
        let (lo, hi) = match s.split_once('-') {
            Some((lo, hi)) => (num(lo)?, num(hi)?),
            None => {
                let n = num(s)?;
                (n, n)
            }
        };
        if lo > hi {
            return Err(bad());
        }
        Ok(TurnBucket { lo, hi: Some(hi) })
    }
}

impl fmt::Display for TurnBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) if hi == self.lo => write!(f, "{}", self.lo),
            Some(hi) => write!(f, "{}-{}", self.lo, hi),
            None => write!(f, "{}+", self.lo),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    pub bucket: TurnBucket,
    pub label: String,
    pub dialogues: usize,
    /// `None` when no frame falls in the bucket.
    pub metrics: Option<MetricRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub all: MetricRow,
    /// `None` when the corpus has no frame of that split.
    pub seen: Option<MetricRow>,
    pub unseen: Option<MetricRow>,
    pub buckets: Vec<BucketRow>,
    pub backend_requests: usize,
    pub backend_failures: usize,
}

fn row_if_any(frames: &[FrameEval]) -> Result<Option<MetricRow>, MetricError> {
    if frames.is_empty() {
        Ok(None)
    } else {
        MetricRow::compute(frames).map(Some)
    }
}

/// Split rows and per-bucket rows over a set of frames. Each frame carries
/// its dialogue's split tag and length.
pub fn aggregate(frames: &[FrameEval], buckets: &[TurnBucket]) -> Result<EvalReport, MetricError> {
    let all = MetricRow::compute(frames)?;
    let by_split = |tag: SplitTag| -> Vec<FrameEval> { frames.iter().filter(|f| f.split == tag).cloned().collect() };
    let mut bucket_rows = Vec::new();
    for b in buckets {
        let inside: Vec<FrameEval> = frames.iter().filter(|f| b.contains(f.turn_count)).cloned().collect();
        let mut ids: Vec<&str> = inside.iter().map(|f| f.dialogue_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        bucket_rows.push(BucketRow {
            bucket: *b,
            label: b.to_string(),
            dialogues: ids.len(),
            metrics: row_if_any(&inside)?,
        });
    }
    Ok(EvalReport {
        all,
        seen: row_if_any(&by_split(SplitTag::Seen))?,
        unseen: row_if_any(&by_split(SplitTag::Unseen))?,
        buckets: bucket_rows,
        backend_requests: 0,
        backend_failures: 0,
    })
}

fn push_row(out: &mut String, label: &str, row: Option<&MetricRow>) {
    let _ = write!(out, "{label:<10}");
    match row {
        Some(r) => {
            let _ = write!(out, "{:>8}", r.frames);
            for v in r.values() {
                let _ = write!(out, "{v:>10.2}");
            }
        }
        None => {
            let _ = write!(out, "{:>8}  (no frames)", 0);
        }
    }
    out.push('\n');
}

fn header(out: &mut String, first: &str) {
    let _ = write!(out, "{first:<10}{:>8}", "frames");
    for n in METRIC_NAMES {
        let short = match n {
            "intent_accuracy" => "intent",
            "requested_slots_f1" => "req_f1",
            other => other,
        };
        let _ = write!(out, "{short:>10}");
    }
    out.push('\n');
}

impl EvalReport {
    /// Fixed-width table: split rows first, then one row per turn bucket.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        header(&mut out, "split");
        push_row(&mut out, "all", Some(&self.all));
        push_row(&mut out, "seen", self.seen.as_ref());
        push_row(&mut out, "unseen", self.unseen.as_ref());
        out.push('\n');
        header(&mut out, "turns");
        for b in &self.buckets {
            push_row(&mut out, &b.label, b.metrics.as_ref());
        }
        if self.backend_requests > 0 {
            let _ = writeln!(
                out,
                "\nbackend failures: {} of {} requests",
                self.backend_failures, self.backend_requests
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation of the `all` row across variant
/// levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdxSummary {
    pub levels: Vec<usize>,
    pub metrics: BTreeMap<String, MetricSummary>,
}

impl SgdxSummary {
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<20}{:>10}{:>10}\n", "metric", "mean", "std");
        for name in METRIC_NAMES {
            let m = &self.metrics[name];
            let _ = writeln!(out, "{name:<20}{:>10.2}{:>10.4}", m.mean, m.std);
        }
        out
    }
}

pub fn sgdx_aggregate(reports: &BTreeMap<usize, EvalReport>) -> Result<SgdxSummary, MetricError> {
    if reports.len() < 2 {
        return Err(MetricError::TooFewVariants(reports.len()));
    }
    let n = reports.len() as f64;
    let mut metrics = BTreeMap::new();
    for (i, name) in METRIC_NAMES.iter().enumerate() {
        let xs: Vec<f64> = reports.values().map(|r| r.all.values()[i]).collect();
        let mean = pairwise_sum(&xs) / n;
        let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
        metrics.insert(
            name.to_string(),
            MetricSummary {
                mean,
                std: (pairwise_sum(&sq) / n).sqrt(),
            },
        );
    }
    Ok(SgdxSummary {
        levels: reports.keys().copied().collect(),
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bucket_parsing() {
        assert_eq!(TurnBucket::parse_list("1-5,6-10,11+").unwrap(), DEFAULT_BUCKETS);
        assert_eq!("3".parse::<TurnBucket>().unwrap(), TurnBucket { lo: 3, hi: Some(3) });
        assert!("5-1".parse::<TurnBucket>().is_err());
        assert!("x".parse::<TurnBucket>().is_err());
        assert!(DEFAULT_BUCKETS[2].contains(40) && !DEFAULT_BUCKETS[0].contains(6));
    }

    fn report_with_combined(v: f64) -> EvalReport {
        let row = MetricRow {
            frames: 1,
            intent_accuracy: v,
            requested_slots_f1: v,
            aga: v,
            jga: v,
            inform: v,
            success: v,
            aaa: v,
            jaa: v,
            user_aaa: v,
            user_jaa: v,
            gleu: v,
            combined: v,
        };
        EvalReport {
            all: row,
            seen: None,
            unseen: None,
            buckets: Vec::new(),
            backend_requests: 0,
            backend_failures: 0,
        }
    }

    #[test]
    fn sgdx_mean_and_population_std() {
        let reports: BTreeMap<usize, EvalReport> = (1..=5).map(|l| (l, report_with_combined(l as f64))).collect();
        let s = sgdx_aggregate(&reports).unwrap();
        assert_eq!(s.metrics["JGA"].mean, 3.0);
        assert!((s.metrics["JGA"].std - 2f64.sqrt()).abs() < 1e-12);
        let one: BTreeMap<usize, EvalReport> = [(1, report_with_combined(1.0))].into();
        assert_eq!(sgdx_aggregate(&one), Err(MetricError::TooFewVariants(1)));
    }
}
