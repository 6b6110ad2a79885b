use std::io::{self, BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{ContextString, TargetString};

/// Context and target concatenated, with the byte span of the target.
///
/// Full-sequence training uses every byte of `full_text`; response-only
/// training restricts the loss to `target_span`. Token masks are derived
/// downstream by intersecting token byte offsets with the span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingRecord {
    pub context: ContextString,
    pub target: TargetString,
    pub full_text: String,
    pub target_span: Range<usize>,
}

pub fn build_training_record(context: ContextString, target: TargetString) -> TrainingRecord {
    let mut full_text = String::with_capacity(context.text.len() + target.text.len());
    full_text.push_str(&context.text);
    full_text.push_str(&target.text);
    let target_span = context.text.len()..full_text.len();
    TrainingRecord {
        context,
        target,
        full_text,
        target_span,
    }
}

impl TrainingRecord {
    pub fn target_text(&self) -> &str {
        &self.full_text[self.target_span.clone()]
    }

    pub fn to_line(&self) -> RecordLine {
        RecordLine {
            full_text: self.full_text.clone(),
            target_start: self.target_span.start,
            target_end: self.target_span.end,
        }
    }
}

/// One line of the training-record export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordLine {
    pub full_text: String,
    pub target_start: usize,
    pub target_end: usize,
}

impl RecordLine {
    /// The target text, if the offsets are in bounds and on char boundaries.
    pub fn target(&self) -> Option<&str> {
        if self.target_start > self.target_end {
            return None;
        }
        self.full_text.get(self.target_start..self.target_end)
    }
}

pub fn write_training_records<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a TrainingRecord>,
) -> io::Result<usize> {
    let mut n = 0;
    for r in records {
        serde_json::to_writer(&mut out, &r.to_line())?;
        out.write_all(b"\n")?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

pub fn read_training_records<R: BufRead>(input: R) -> io::Result<Vec<RecordLine>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
