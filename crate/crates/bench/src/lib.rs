//! Shared inputs for the benchmarks.

use std::path::Path;

use sgtod_core::schema::load_schema_path;
use sgtod_core::simulator::{synth_corpus, SynthCorpus};
use sgtod_core::DomainSchema;

pub fn fixture_schemas() -> Vec<DomainSchema> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/schema.json");
    load_schema_path(&path).expect("fixture schemas")
}

/// A rule-agent corpus of `n` dialogues over the fixture schemas.
pub fn corpus(n: usize) -> SynthCorpus {
    synth_corpus(&fixture_schemas(), n, 1).expect("synthetic corpus")
}
