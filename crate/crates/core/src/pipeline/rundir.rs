use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{render_report, Engine, PipelineError, ReportFormat, RoundTiming, RunConfig, RunState, Services};
use crate::evidence::VectorStore;

const CONFIG: &str = "config.toml";
const STATE: &str = "state.json";
const RECORDS: &str = "records.jsonl";
const MATCHES: &str = "matches.jsonl";
const TRANSCRIPTS: &str = "transcripts.jsonl";
const TIMINGS: &str = "timings.jsonl";
const REPORT: &str = "report.txt";

fn io(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::Io(format!("{}: {e}", path.display()))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), PipelineError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io(path, e))
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| serde_json::to_string(x).expect("record serializes") + "\n")
        .collect()
}

/// On-disk home of one run: config copy, checkpointed state, per-round
/// records, match log, transcripts, timings and the final report.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    /// Prepares a directory for a new run. Refuses to reuse one that already
    /// holds a checkpoint.
    pub fn create(root: &Path, config: &RunConfig) -> Result<Self, PipelineError> {
        fs::create_dir_all(root).map_err(|e| io(root, e))?;
        let dir = Self { root: root.to_path_buf() };
        if dir.path(STATE).exists() {
            return Err(PipelineError::Io(format!(
                "{} already holds a run; use resume",
                root.display()
            )));
        }
        write_atomic(&dir.path(CONFIG), &config.to_toml())?;
        for name in [TRANSCRIPTS, TIMINGS] {
            File::create(dir.path(name)).map_err(|e| io(&dir.path(name), e))?;
        }
        Ok(dir)
    }

    pub fn open(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn state_path(&self) -> PathBuf {
        self.path(STATE)
    }

    pub fn load_state(&self) -> Result<RunState, PipelineError> {
        let path = self.path(STATE);
        let text = fs::read_to_string(&path)
            .map_err(|e| PipelineError::CorruptCheckpoint(format!("{}: {e}", path.display())))?;
        RunState::from_json(&text)
    }

    /// Appending sink for provider transcripts.
    pub fn transcript_sink(&self) -> Result<Box<dyn Write + Send>, PipelineError> {
        let path = self.path(TRANSCRIPTS);
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io(&path, e))?;
        Ok(Box::new(f))
    }

    /// Persists the state, then the line-delimited views derived from it.
    pub fn checkpoint(&self, state: &RunState) -> Result<(), PipelineError> {
        write_atomic(&self.path(STATE), &state.to_json())?;
        write_atomic(&self.path(RECORDS), &jsonl(&state.records))?;
        write_atomic(&self.path(MATCHES), &jsonl(&state.tournament.matches))?;
        if state.status.is_terminal() && !state.records.is_empty() {
            write_atomic(&self.path(REPORT), &render_report(state, ReportFormat::Table)?)?;
        }
        Ok(())
    }

    pub fn append_timing(&self, timing: &RoundTiming) -> Result<(), PipelineError> {
        let path = self.path(TIMINGS);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io(&path, e))?;
        writeln!(f, "{}", serde_json::to_string(timing).expect("timing serializes")).map_err(|e| io(&path, e))
    }
}

/// Drives `state` to completion (or `max_rounds` more rounds), checkpointing
/// into `dir` after every round and on failure. A failed state is retried
/// from its last completed round.
pub fn execute(
    dir: &RunDir,
    mut state: RunState,
    services: &Services,
    store: &VectorStore,
    max_rounds: Option<u32>,
) -> Result<RunState, PipelineError> {
    if state.status == super::RunStatus::Failed {
        state.status = super::RunStatus::Running;
        state.failure = None;
    }
    let mut engine = Engine::new(services, store)?;
    dir.checkpoint(&state)?;
    engine.drive(&mut state, max_rounds, |s, timing| {
        if let Some(t) = timing {
            dir.append_timing(t)?;
        }
        dir.checkpoint(s)
    })?;
    Ok(state)
}
