use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sgtod_core::corpus::{corpus_stats, dialogues_to_json, load_dialogue_path, partition_corpus};
use sgtod_core::error::CorpusError;
use sgtod_core::eval::{evaluate_corpus, gold_training_records};
use sgtod_core::metrics::{aggregate, sgdx_aggregate, EvalReport, SgdxSummary, METRIC_NAMES};
use sgtod_core::schema::{load_schema_path, schemas_to_json};
use sgtod_core::serializer::write_training_records;
use sgtod_core::simulator::{corpus_digest, synth_corpus, Outcome, SimulatedDialog};
use sgtod_core::variants::{surface_variant, SchemaMapping};
use sgtod_core::{Dialogue, DomainSchema, DomainSplit};

use crate::config::{usage, BackendChoice, Format, RunConfig};

pub fn load_schemas(config: &RunConfig) -> anyhow::Result<Vec<DomainSchema>> {
    let path = config.existing("schemas", &config.schemas)?;
    load_schema_path(&path).with_context(|| format!("loading schemas from {}", path.display()))
}

pub fn load_dialogues(config: &RunConfig) -> anyhow::Result<Vec<Dialogue>> {
    let path = config.existing("dialogues", &config.dialogues)?;
    load_dialogue_path(&path).with_context(|| format!("loading dialogues from {}", path.display()))
}

fn load_split(config: &RunConfig, dialogues: &[Dialogue]) -> anyhow::Result<DomainSplit> {
    match config.optional_existing("split", &config.split)? {
        Some(path) => DomainSplit::load(&path).with_context(|| format!("loading split from {}", path.display())),
        None => Ok(DomainSplit::all_seen(dialogues.iter().flat_map(|d| d.services.iter()))),
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    #[serde(flatten)]
    stats: &'a sgtod_core::corpus::CorpusStats,
    seen_dialogues: Option<usize>,
    unseen_dialogues: Option<usize>,
}

pub fn ingest(config: &RunConfig) -> anyhow::Result<()> {
    let format = config.format()?;
    let schemas = load_schemas(config)?;
    let dialogues = load_dialogues(config)?;
    let stats = corpus_stats(&dialogues, &schemas);
    let (seen, unseen) = match config.optional_existing("split", &config.split)? {
        Some(_) => {
            let split = load_split(config, &dialogues)?;
            let part = partition_corpus(&dialogues, &split)?;
            (Some(part.seen.len()), Some(part.unseen.len()))
        }
        None => (None, None),
    };
    if format == Format::Json {
        let summary = IngestSummary {
            stats: &stats,
            seen_dialogues: seen,
            unseen_dialogues: unseen,
        };
        println!("{}", serde_json::to_string_pretty(&summary)?);
        return Ok(());
    }
    println!("schemas     {}", schemas.len());
    println!("dialogues   {}", stats.dialogues);
    println!("turns       {}", stats.turns);
    println!("user turns  {}", stats.user_turns);
    println!("frames      {}", stats.frames);
    println!("domains     {}", stats.domains.len());
    if let (Some(s), Some(u)) = (seen, unseen) {
        println!("seen        {s}");
        println!("unseen      {u}");
    }
    for (service, n) in &stats.services {
        println!("  {service:<24}{n}");
    }
    println!("warnings    {}", stats.warnings.len());
    for w in &stats.warnings {
        println!("  {w}");
    }
    Ok(())
}

/// Runs `choice` over the corpus and aggregates the frames. Backend failures
/// are counted in the report, never raised.
fn run_evaluation(
    config: &RunConfig,
    dialogues: &[Dialogue],
    schemas: &[DomainSchema],
    split: &DomainSplit,
    choice: &BackendChoice,
) -> anyhow::Result<EvalReport> {
    let timeout = config.timeout();
    let run = evaluate_corpus(
        dialogues,
        schemas,
        split,
        config.context_mode()?,
        config.workers(),
        || choice.build(dialogues, timeout),
    )?;
    let mut report = aggregate(&run.frames, &config.buckets()?)?;
    report.backend_requests = run.requests;
    report.backend_failures = run.failed_requests;
    if let Some(first) = run.failures.first() {
        eprintln!(
            "warning: {} of {} dialogues hit a backend error (first: {} at {}: {})",
            run.failures.len(),
            dialogues.len(),
            first.dialogue_id,
            first.turn_id,
            first.error
        );
    }
    Ok(report)
}

pub fn evaluate(config: &RunConfig) -> anyhow::Result<()> {
    let format = config.format()?;
    let choice = config.backend_choice("oracle")?;
    config.buckets()?;
    config.context_mode()?;
    let schemas = load_schemas(config)?;
    let dialogues = load_dialogues(config)?;
    let split = load_split(config, &dialogues)?;
    let report = run_evaluation(config, &dialogues, &schemas, &split, &choice)?;
    if let Some(dir) = &config.out {
        create_dir(dir)?;
        write_file(&dir.join("report.json"), &report.to_json())?;
        write_file(&dir.join("report.txt"), &report.to_table())?;
    }
    match format {
        Format::Table => print!("{}", report.to_table()),
        Format::Json => println!("{}", report.to_json()),
    }
    Ok(())
}

fn outcome_label(o: Outcome) -> &'static str {
    match o {
        Outcome::Success => "success",
        Outcome::Failure => "failure",
        Outcome::Unfinished => "unfinished",
    }
}

fn transcript(sim: &SimulatedDialog) -> String {
    let mut out = format!(
        "=== {} {} {}\n",
        sim.dialogue.dialogue_id,
        sim.dialogue.services.join(","),
        outcome_label(sim.outcome)
    );
    for turn in &sim.dialogue.turns {
        let _ = writeln!(out, "{:<8}{}", format!("{}:", turn.speaker), turn.utterance);
    }
    out
}

pub fn simulate(config: &RunConfig) -> anyhow::Result<()> {
    let out = config.out.clone().ok_or_else(|| usage("--out is required"))?;
    let schemas = load_schemas(config)?;
    let n = config.dialogs.unwrap_or(10);
    let seed = config.seed.unwrap_or(0);
    let corpus = synth_corpus(&schemas, n, seed)?;
    create_dir(&out)?;
    write_file(&out.join("schema.json"), &schemas_to_json(&schemas))?;
    write_file(&out.join("dialogues_001.json"), &dialogues_to_json(&corpus.dialogues))?;
    let records = fs::File::create(out.join("training_records.jsonl")).context("creating training_records.jsonl")?;
    write_training_records(std::io::BufWriter::new(records), &corpus.records)?;
    let transcripts: String = corpus.simulated.iter().map(transcript).collect::<Vec<_>>().join("\n");
    write_file(&out.join("transcripts.txt"), &transcripts)?;

    let count = |o: Outcome| corpus.simulated.iter().filter(|s| s.outcome == o).count();
    println!(
        "{} dialogues ({} success, {} failure, {} unfinished), {} training records",
        corpus.dialogues.len(),
        count(Outcome::Success),
        count(Outcome::Failure),
        count(Outcome::Unfinished),
        corpus.records.len()
    );
    println!("digest {}", corpus_digest(&corpus.dialogues));
    Ok(())
}

pub fn trainprep(config: &RunConfig) -> anyhow::Result<()> {
    let schemas = load_schemas(config)?;
    let dialogues = load_dialogues(config)?;
    let records: Vec<_> = dialogues
        .iter()
        .flat_map(|d| gold_training_records(d, &schemas))
        .collect();
    let n = match &config.out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_training_records(std::io::BufWriter::new(file), &records)?
        }
        None => write_training_records(std::io::stdout().lock(), &records)?,
    };
    eprintln!("{n} training records");
    Ok(())
}

/// What `sgdx --out` writes: one report per variant level and the summary.
#[derive(Debug, Serialize, Deserialize)]
pub struct SgdxDocument {
    pub reports: BTreeMap<usize, EvalReport>,
    pub summary: SgdxSummary,
}

impl SgdxDocument {
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<8}", "level");
        for name in METRIC_NAMES {
            let _ = write!(out, "{:>20}", name);
        }
        out.push('\n');
        for (level, report) in &self.reports {
            let _ = write!(out, "{:<8}", format!("v{level}"));
            for v in report.all.values() {
                let _ = write!(out, "{v:>20.2}");
            }
            out.push('\n');
        }
        out.push('\n');
        out.push_str(&self.summary.to_table());
        out
    }
}

fn variant_sets(config: &RunConfig, base: &[DomainSchema]) -> anyhow::Result<Vec<Vec<DomainSchema>>> {
    match (&config.variants, config.surface_variants) {
        (Some(paths), _) if !paths.is_empty() => paths
            .iter()
            .map(|p| {
                let path = config.existing("variants", &Some(p.clone()))?;
                load_schema_path(&path).with_context(|| format!("loading variant {}", path.display()))
            })
            .collect(),
        (_, Some(k)) => Ok((1..=k).map(|level| surface_variant(base, level)).collect()),
        _ => Err(usage("give --variants or --surface-variants")),
    }
}

pub fn sgdx(config: &RunConfig) -> anyhow::Result<()> {
    let format = config.format()?;
    let choice = config.backend_choice("oracle")?;
    let schemas = load_schemas(config)?;
    let sets = variant_sets(config, &schemas)?;
    let dialogues = load_dialogues(config)?;
    let split = load_split(config, &dialogues)?;
    let mut reports = BTreeMap::new();
    for (i, variant) in sets.iter().enumerate() {
        let level = i + 1;
        let mapping = SchemaMapping::between(&schemas, variant, level).map_err(|e| match e {
            CorpusError::VariantMismatch { .. } => usage(e.to_string()),
            other => other.into(),
        })?;
        let mapped: Vec<Dialogue> = dialogues.iter().map(|d| mapping.dialogue(d)).collect();
        reports.insert(level, run_evaluation(config, &mapped, variant, &split, &choice)?);
    }
    let summary = sgdx_aggregate(&reports).map_err(|e| usage(e.to_string()))?;
    let doc = SgdxDocument { reports, summary };
    let json = serde_json::to_string_pretty(&doc)?;
    if let Some(dir) = &config.out {
        create_dir(dir)?;
        write_file(&dir.join("sgdx.json"), &json)?;
        write_file(&dir.join("sgdx.txt"), &doc.to_table())?;
    }
    match format {
        Format::Table => print!("{}", doc.to_table()),
        Format::Json => println!("{json}"),
    }
    Ok(())
}

pub fn report(config: &RunConfig) -> anyhow::Result<()> {
    let format = config.format()?;
    let path = config.existing("input", &config.input)?;
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut stdout = std::io::stdout().lock();
    if let Ok(report) = serde_json::from_str::<EvalReport>(&text) {
        match format {
            Format::Table => write!(stdout, "{}", report.to_table())?,
            Format::Json => writeln!(stdout, "{}", report.to_json())?,
        }
        return Ok(());
    }
    let doc: SgdxDocument = serde_json::from_str(&text).map_err(|e| {
        usage(format!(
            "{} is neither an evaluate nor an sgdx report: {e}",
            path.display()
        ))
    })?;
    match format {
        Format::Table => write!(stdout, "{}", doc.to_table())?,
        Format::Json => writeln!(stdout, "{}", serde_json::to_string_pretty(&doc)?)?,
    }
    Ok(())
}
