use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use hypoloop::evidence::{ingest_corpus, read_corpus, ChunkingConfig, VectorStore, STORE_FILE};
use hypoloop::pipeline::{
    build_embedder, demo, execute, render_report, ReportFormat, RunConfig, RunDir, RunState, RunStatus, Services,
};

#[derive(Parser)]
#[command(name = "hypoloop", version, about = "Belief-guided hypothesis proposal, validation and refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Csv,
    Jsonl,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Table => ReportFormat::Table,
            Format::Csv => ReportFormat::Csv,
            Format::Jsonl => ReportFormat::Jsonl,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Chunk and embed a JSON-lines corpus into a vector store.
    Ingest {
        /// One `{"doc_id", "title", "text"}` object per line.
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Run config whose `[embedder]` table selects the embedding model.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Target chunk length in characters.
        #[arg(long, default_value_t = ChunkingConfig::default().target)]
        target: usize,
        /// Characters shared by consecutive chunks.
        #[arg(long, default_value_t = ChunkingConfig::default().overlap)]
        overlap: usize,
    },
    /// Run the loop, or continue a checkpointed run with `--resume`.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        resume: bool,
        /// Stop after this many rounds in this session.
        #[arg(long)]
        rounds: Option<u32>,
    },
    /// Summarize a run directory.
    Report {
        run_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// End-to-end run on a built-in corpus with mock models.
    Demo {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Also write the run directory and store here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
}

fn ingest(corpus: &Path, out: &Path, config: Option<&Path>, chunking: ChunkingConfig) -> Result<()> {
    let embedder_config = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunConfig::embedder_from_toml(&text)?
        }
        None => Default::default(),
    };
    let embedder = build_embedder(&embedder_config)?;
    let docs = read_corpus(corpus).with_context(|| format!("reading {}", corpus.display()))?;
    let mut store = if out.join(STORE_FILE).exists() {
        let store = VectorStore::load(out)?;
        if store.chunking != chunking {
            bail!("{} was built with different chunking settings", out.display());
        }
        store
    } else {
        VectorStore::for_embedder(&*embedder, chunking)?
    };
    if store.embedder != embedder.descriptor() {
        bail!("{} was built with embedder `{}`", out.display(), store.embedder);
    }
    let added = ingest_corpus(&mut store, &docs, &*embedder)?;
    store.save(out)?;
    println!(
        "{} documents, {added} new chunks, {} chunks in {}",
        docs.len(),
        store.len(),
        out.display()
    );
    Ok(())
}

fn run(config: Option<&Path>, store_dir: &Path, out: &Path, resume: bool, rounds: Option<u32>) -> Result<RunState> {
    let (dir, state) = if resume {
        let dir = RunDir::open(out);
        let state = dir.load_state()?;
        if let Some(p) = config {
            if RunConfig::load(p)? != state.config {
                bail!("{} differs from the config of the run being resumed", p.display());
            }
        }
        (dir, state)
    } else {
        let Some(p) = config else {
            bail!("--config is required unless --resume is given");
        };
        let config = RunConfig::load(p)?;
        (RunDir::create(out, &config)?, RunState::new(config)?)
    };
    let store = VectorStore::load(store_dir).with_context(|| format!("loading store {}", store_dir.display()))?;
    let services = Services::from_config(&state.config)?.with_transcript(dir.transcript_sink()?);
    Ok(execute(&dir, state, &services, &store, rounds)?)
}

fn finish(state: &RunState, format: Format) -> Result<ExitCode> {
    if !state.records.is_empty() {
        print!("{}", render_report(state, format.into())?);
    }
    if state.status == RunStatus::Failed {
        eprintln!("run failed: {}", state.failure.as_deref().unwrap_or("unknown error"));
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> Result<ExitCode> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Ingest {
            corpus,
            out,
            config,
            target,
            overlap,
        } => {
            ingest(&corpus, &out, config.as_deref(), ChunkingConfig { target, overlap })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            config,
            store,
            out,
            resume,
            rounds,
        } => {
            let state = run(config.as_deref(), &store, &out, resume, rounds)?;
            finish(&state, Format::Table)
        }
        Command::Report { run_dir, format } => {
            let state = RunDir::open(&run_dir).load_state()?;
            print!("{}", render_report(&state, format.into())?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Demo { seed, out, format } => {
            let state = demo::run_demo(seed, out.as_deref())?;
            finish(&state, format)
        }
    }
}
