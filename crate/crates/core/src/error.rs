use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while reading schemas, dialogues, splits and schema variants.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed document at line {line}, column {column}: {message}")]
    MalformedDocument {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at {location}: {message}")]
    SchemaViolation { location: String, message: String },
    #[error("annotation violation at {location}: {message}")]
    AnnotationViolation { location: String, message: String },
    #[error("domain `{0}` is classified neither as seen nor as unseen")]
    UnclassifiedDomain(String),
    #[error("domain `{0}` is listed as both seen and unseen")]
    OverlappingSplit(String),
    #[error("schema variant {level}: {message}")]
    VariantMismatch { level: usize, message: String },
    #[error("no frame for service `{service}` at turn {turn} of dialogue `{dialogue_id}`")]
    NoSuchFrame {
        dialogue_id: String,
        turn: usize,
        service: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl CorpusError {
    /// Maps a serde_json failure onto the two document-level error kinds:
    /// syntax problems are malformed documents, shape problems are violations
    /// of the expected format.
    pub(crate) fn from_json(err: serde_json::Error, violation: fn(String, String) -> CorpusError) -> Self {
        use serde_json::error::Category;
        match err.classify() {
            Category::Data => violation(format!("line {}, column {}", err.line(), err.column()), err.to_string()),
            Category::Io | Category::Syntax | Category::Eof => CorpusError::MalformedDocument {
                line: err.line(),
                column: err.column(),
                message: err.to_string(),
            },
        }
    }

    pub(crate) fn schema(location: String, message: String) -> Self {
        CorpusError::SchemaViolation { location, message }
    }

    pub(crate) fn annotation(location: String, message: String) -> Self {
        CorpusError::AnnotationViolation { location, message }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CorpusError::Io {
            path: path.into(),
            source,
        }
    }
}
