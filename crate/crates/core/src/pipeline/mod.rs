//! The propose, validate, refine loop: run configuration, per-round records,
//! the resumable run state, checkpoint directories and reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{binary_entropies, shannon_entropy, BeliefDistribution, BeliefError, ScoreTriple};
use crate::evidence::EvidenceError;
use crate::hypothesis::{Hypothesis, HypothesisId, IdAllocator, Strategy};
use crate::judge::{JudgeError, Tournament};
use crate::proposal::ProposalError;
use crate::providers::{NrfError, ProviderError};
use crate::refinement::RefinementError;

mod config;
pub mod demo;
mod report;
mod rundir;
mod run;

pub use config::{ClusteringConfig, RunConfig};
pub use report::{render_report, summarize, ReportFormat, RoundRow, Summary};
pub use rundir::{execute, RunDir};
pub use run::{build_embedder, build_text_provider, run, Engine, RoundTiming, Services};

/// Identifies a serialized [`RunState`].
pub const STATE_SCHEMA: &str = "hypoloop-run";
pub const STATE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("run state has no records")]
    EmptyState,
    #[error("evidence store is empty")]
    EmptyStore,
    #[error("store was embedded with `{store}` but the run uses `{config}`")]
    EmbedderMismatch { store: String, config: String },
    #[error("run already finished with status {0:?}")]
    Finished(RunStatus),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Proposal(#[from] ProposalError),
    #[error(transparent)]
    Scoring(#[from] NrfError),
    #[error(transparent)]
    Evidence(#[from] EvidenceError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Refinement(#[from] RefinementError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    ConvergedEntropy,
    MaxIterations,
    Failed,
}

impl RunStatus {
    pub fn is_terminal(self) -> bool {
        self != RunStatus::Running
    }

    pub fn label(self) -> &'static str {
        match self {
            RunStatus::Running => "running",
            RunStatus::ConvergedEntropy => "converged-entropy",
            RunStatus::MaxIterations => "max-iterations",
            RunStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSnapshot {
    pub id: HypothesisId,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<ScoreTriple<f64>>,
}

impl From<&Hypothesis> for HypothesisSnapshot {
    fn from(h: &Hypothesis) -> Self {
        Self {
            id: h.id.clone(),
            text: h.text.clone(),
            scores: h.scores,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkScore {
    pub chunk_id: String,
    pub similarity: f64,
    pub base: f64,
    pub method_match: bool,
    pub contribution: f64,
}

/// Evidence outcome of one hypothesis in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodRow {
    pub id: HypothesisId,
    pub likelihood: f64,
    /// Set when no chunk was retrieved and the floor stood in.
    pub floor_applied: bool,
    pub chunks: Vec<ChunkScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementSummary {
    pub strategy: Strategy,
    pub targets: Vec<HypothesisId>,
    /// Slot the successor took over.
    pub replaced: HypothesisId,
    pub produced: HypothesisSnapshot,
    pub declared: Strategy,
    pub mismatch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalSummary {
    pub candidates: usize,
    pub cluster_sizes: Vec<usize>,
    pub inertia: f64,
}

/// Everything observed in one round. Round 0 is the proposal; rounds 1.. are
/// validation rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub round: u32,
    /// The set the round's beliefs and games refer to, before refinement.
    pub hypotheses: Vec<HypothesisSnapshot>,
    pub beliefs: BeliefDistribution<f64>,
    pub entropy: f64,
    pub binary_entropies: Vec<(HypothesisId, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub likelihoods: Vec<LikelihoodRow>,
    /// Every likelihood-weighted belief was zero; the prior was kept.
    #[serde(default)]
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selected: Vec<HypothesisId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refinements: Vec<RefinementSummary>,
    /// Ratings after the round's games, reference included.
    pub ratings: BTreeMap<String, f64>,
    pub elo_delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<ProposalSummary>,
}

impl IterationRecord {
    /// Checks that the stored entropies follow from the stored beliefs.
    pub fn check_entropies(&self, tolerance: f64) -> Result<(), String> {
        let h = shannon_entropy(&self.beliefs);
        if (h - self.entropy).abs() > tolerance {
            return Err(format!("round {}: entropy {} but beliefs give {h}", self.round, self.entropy));
        }
        let s = binary_entropies(&self.beliefs);
        if s.len() != self.binary_entropies.len() {
            return Err(format!("round {}: binary entropy count differs", self.round));
        }
        for ((id, want), (sid, got)) in s.iter().zip(&self.binary_entropies) {
            if id != sid || (want - got).abs() > tolerance {
                return Err(format!("round {}: binary entropy of {sid} is {got}, expected {want}", self.round));
            }
        }
        Ok(())
    }
}

/// A run in progress or finished. Holds everything needed to continue, so a
/// resumed run replays exactly what an uninterrupted one would do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub schema: String,
    pub version: u32,
    pub config: RunConfig,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    pub records: Vec<IterationRecord>,
    /// Set entering the next round; after a terminal round this is H_T.
    pub hypotheses: Vec<Hypothesis>,
    /// Beliefs entering the next round; after a terminal round this is B_T.
    pub beliefs: Option<BeliefDistribution<f64>>,
    pub tournament: Tournament,
    pub ids: IdAllocator,
}

impl RunState {
    pub fn new(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self {
            schema: STATE_SCHEMA.into(),
            version: STATE_VERSION,
            tournament: Tournament::new(config.elo.clone()),
            config,
            status: RunStatus::Running,
            failure: None,
            records: Vec::new(),
            hypotheses: Vec::new(),
            beliefs: None,
            ids: IdAllocator::new(),
        })
    }

    /// Canonical serialization; two equal states give equal bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("run state serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| PipelineError::CorruptCheckpoint(e.to_string()))?;
        let schema = value.get("schema").and_then(|v| v.as_str()).unwrap_or_default();
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or_default();
        if schema != STATE_SCHEMA || version != u64::from(STATE_VERSION) {
            return Err(PipelineError::CorruptCheckpoint(format!(
                "expected {STATE_SCHEMA} v{STATE_VERSION}, found `{schema}` v{version}"
            )));
        }
        let state: Self =
            serde_json::from_value(value).map_err(|e| PipelineError::CorruptCheckpoint(e.to_string()))?;
        state.verify().map_err(PipelineError::CorruptCheckpoint)?;
        Ok(state)
    }

    /// Index of the next round to execute.
    pub fn next_round(&self) -> u32 {
        self.records.len() as u32
    }

    pub fn final_beliefs(&self) -> Option<&BeliefDistribution<f64>> {
        self.beliefs.as_ref()
    }

    /// Structural invariants: contiguous rounds, constant set size,
    /// recomputable entropies and a status that matches the stop rule.
    pub fn verify(&self) -> Result<(), String> {
        let n = self.config.n;
        for (i, r) in self.records.iter().enumerate() {
            if r.round as usize != i {
                return Err(format!("record {i} is labelled round {}", r.round));
            }
            if r.hypotheses.len() != n || r.beliefs.len() != n {
                return Err(format!("round {i} holds {} hypotheses, expected {n}", r.hypotheses.len()));
            }
            r.check_entropies(1e-9)?;
        }
        if !self.records.is_empty() && self.hypotheses.len() != n {
            return Err(format!("current set holds {} hypotheses, expected {n}", self.hypotheses.len()));
        }
        let t = self.records.len();
        match self.status {
            RunStatus::ConvergedEntropy => {
                if t < 3 {
                    return Err("converged before two validation rounds".into());
                }
                let (a, b) = (self.records[t - 1].entropy, self.records[t - 2].entropy);
                if (a - b).abs() >= self.config.epsilon_h {
                    return Err("converged status but entropy change exceeds epsilon_h".into());
                }
            }
            RunStatus::MaxIterations => {
                if t != self.config.t_max as usize + 1 {
                    return Err(format!("max-iterations status with {t} records"));
                }
            }
            RunStatus::Running | RunStatus::Failed => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> RunConfig {
        RunConfig {
            question: "q".into(),
            reference: "r".into(),
            ..RunConfig::default()
        }
    }

    #[test]
    fn fresh_state_round_trips() {
        let s = RunState::new(config()).unwrap();
        let text = s.to_json();
        let back = RunState::from_json(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn schema_mismatch_is_corrupt() {
        let text = RunState::new(config()).unwrap().to_json().replace("hypoloop-run", "other");
        assert!(matches!(RunState::from_json(&text), Err(PipelineError::CorruptCheckpoint(_))));
        assert!(matches!(RunState::from_json("{}"), Err(PipelineError::CorruptCheckpoint(_))));
        assert!(matches!(RunState::from_json(""), Err(PipelineError::CorruptCheckpoint(_))));
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = config();
        c.n = 1;
        assert!(RunState::new(c).is_err());
    }
}
