mod chat;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RunConfig, UsageError};

/// Schema-guided task-oriented dialog harness.
#[derive(Parser, Debug)]
#[command(name = "sgtod", version)]
struct Cli {
    /// Flat TOML file with default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a corpus and print counts and validation warnings.
    Ingest {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a backend over a corpus and report metrics.
    Evaluate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        backend: BackendArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Dialogue-length buckets, e.g. `1-5,6-10,11+`.
        #[arg(long)]
        buckets: Option<String>,
    },
    /// Generate a synthetic corpus with the user simulator and rule agent.
    Simulate {
        #[arg(long)]
        schemas: Option<PathBuf>,
        /// Number of dialogues.
        #[arg(long, short = 'n')]
        dialogs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export training records of an annotated corpus as JSON lines.
    Trainprep {
        #[arg(long)]
        schemas: Option<PathBuf>,
        #[arg(long)]
        dialogues: Option<PathBuf>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate under each schema variant and report mean and std.
    Sgdx {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        backend: BackendArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Variant schema files or directories, one per level.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<PathBuf>,
        /// Generate this many renamed variants instead of reading them.
        #[arg(long)]
        surface_variants: Option<usize>,
    },
    /// Talk to a backend from the terminal.
    Chat {
        #[arg(long)]
        schemas: Option<PathBuf>,
        /// Dialogues for the oracle backend.
        #[arg(long)]
        dialogues: Option<PathBuf>,
        /// Service to talk to; the first schema when absent.
        #[arg(long)]
        service: Option<String>,
        /// Seed of the synthetic database.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        timeout_secs: Option<u64>,
    },
    /// Re-render a saved evaluate or sgdx report.
    Report {
        /// A report.json or sgdx.json file.
        #[arg(long)]
        input: Option<PathBuf>,
        /// `table` or `json`.
        #[arg(long)]
        format: Option<String>,
    },
}

#[derive(Args, Debug)]
struct CorpusArgs {
    /// Schema file, or a directory holding schema.json.
    #[arg(long)]
    schemas: Option<PathBuf>,
    /// Dialogue file, or a directory of dialogues_*.json files.
    #[arg(long)]
    dialogues: Option<PathBuf>,
    /// Seen/unseen split file. Without one every service counts as seen.
    #[arg(long)]
    split: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BackendArgs {
    /// `oracle`, `rule` or `remote:tcp://HOST:PORT` / `remote:stdio:CMD ARGS`.
    #[arg(long)]
    backend: Option<String>,
    /// Per-request timeout of a remote backend.
    #[arg(long)]
    timeout_secs: Option<u64>,
    /// Dialogues evaluated in parallel.
    #[arg(long)]
    workers: Option<usize>,
    /// Previous-state source: `predicted` or `gold`.
    #[arg(long)]
    context_mode: Option<String>,
}

#[derive(Args, Debug)]
struct OutputArgs {
    /// Directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `table` or `json`.
    #[arg(long)]
    format: Option<String>,
}

impl CorpusArgs {
    fn apply(self, c: &mut RunConfig) {
        c.schemas = self.schemas;
        c.dialogues = self.dialogues;
        c.split = self.split;
    }
}

impl BackendArgs {
    fn apply(self, c: &mut RunConfig) {
        c.backend = self.backend;
        c.timeout_secs = self.timeout_secs;
        c.workers = self.workers;
        c.context_mode = self.context_mode;
    }
}

impl OutputArgs {
    fn apply(self, c: &mut RunConfig) {
        c.out = self.out;
        c.format = self.format;
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut flags = RunConfig::default();
    match cli.command {
        Command::Ingest { corpus, output } => {
            corpus.apply(&mut flags);
            output.apply(&mut flags);
            commands::ingest(&file.overlay(flags))
        }
        Command::Evaluate {
            corpus,
            backend,
            output,
            buckets,
        } => {
            corpus.apply(&mut flags);
            backend.apply(&mut flags);
            output.apply(&mut flags);
            flags.buckets = buckets;
            commands::evaluate(&file.overlay(flags))
        }
        Command::Simulate {
            schemas,
            dialogs,
            seed,
            out,
        } => {
            flags.schemas = schemas;
            flags.dialogs = dialogs;
            flags.seed = seed;
            flags.out = out;
            commands::simulate(&file.overlay(flags))
        }
        Command::Trainprep {
            schemas,
            dialogues,
            out,
        } => {
            flags.schemas = schemas;
            flags.dialogues = dialogues;
            flags.out = out;
            commands::trainprep(&file.overlay(flags))
        }
        Command::Sgdx {
            corpus,
            backend,
            output,
            variants,
            surface_variants,
        } => {
            corpus.apply(&mut flags);
            backend.apply(&mut flags);
            output.apply(&mut flags);
            flags.variants = (!variants.is_empty()).then_some(variants);
            flags.surface_variants = surface_variants;
            commands::sgdx(&file.overlay(flags))
        }
        Command::Chat {
            schemas,
            dialogues,
            service,
            seed,
            backend,
            timeout_secs,
        } => {
            flags.schemas = schemas;
            flags.dialogues = dialogues;
            flags.service = service;
            flags.seed = seed;
            flags.backend = backend;
            flags.timeout_secs = timeout_secs;
            let stdin = std::io::stdin();
            chat::chat(&file.overlay(flags), stdin.lock(), &mut std::io::stdout().lock())
        }
        Command::Report { input, format } => {
            flags.input = input;
            flags.format = format;
            commands::report(&file.overlay(flags))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
