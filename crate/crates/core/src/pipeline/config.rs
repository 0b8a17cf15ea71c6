use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::belief::WeightConfig;
use crate::judge::EloConfig;
use crate::proposal::{KMeansParams, SamplingPlan};
use crate::providers::ProviderConfig;
use crate::refinement::RefinementConfig;

/// Clustering settings read from the config. `k` is always the set size and
/// the seed is derived from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        let d = KMeansParams::default();
        Self {
            restarts: d.restarts,
            max_iters: d.max_iters,
            tolerance: d.tolerance,
        }
    }
}

/// Every setting of a run. Loaded from TOML; unspecified fields take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub question: String,
    /// Abstract of the published work the hypotheses are rated against.
    pub reference: String,
    /// Research field named in the scoring prompts.
    pub keyword: String,
    /// Hypothesis set size.
    pub n: usize,
    /// Evidence chunks retrieved per hypothesis.
    pub k: usize,
    /// Binary-entropy threshold for refinement.
    pub tau_s: f64,
    /// Entropy change below which the run stops.
    pub epsilon_h: f64,
    /// Validation rounds at most.
    pub t_max: u32,
    pub seed: u64,
    /// Likelihood given to a hypothesis that retrieved no evidence.
    pub evidence_floor: f64,
    pub weights: WeightConfig<f64>,
    pub sampling: SamplingPlan,
    pub clustering: ClusteringConfig,
    pub refinement: RefinementConfig,
    pub elo: EloConfig,
    pub provider: ProviderConfig,
    pub embedder: ProviderConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            question: String::new(),
            reference: String::new(),
            keyword: "artificial intelligence".into(),
            n: 5,
            k: 5,
            tau_s: 0.3,
            epsilon_h: 0.01,
            t_max: 8,
            seed: 0,
            evidence_floor: 0.05,
            weights: WeightConfig::uniform(),
            sampling: SamplingPlan::default(),
            clustering: ClusteringConfig::default(),
            refinement: RefinementConfig::default(),
            elo: EloConfig::default(),
            provider: ProviderConfig::default(),
            embedder: ProviderConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        let config: Self = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Reads only the `[embedder]` table, for tools that need no question.
    pub fn embedder_from_toml(text: &str) -> Result<ProviderConfig, PipelineError> {
        #[derive(Deserialize)]
        struct Partial {
            #[serde(default)]
            embedder: ProviderConfig,
        }
        let p: Partial = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        p.embedder.validate()?;
        Ok(p.embedder)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.question.trim().is_empty() {
            return bad("question is empty");
        }
        if self.reference.trim().is_empty() {
            return bad("reference abstract is empty");
        }
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if self.k == 0 {
            return bad("k must be positive");
        }
        if !(self.tau_s > 0.0 && self.tau_s <= 1.0) {
            return bad("tau_s must lie in (0, 1]");
        }
        if !(self.epsilon_h > 0.0) {
            return bad("epsilon_h must be positive");
        }
        if self.t_max == 0 {
            return bad("t_max must be positive");
        }
        if !(0.0..=1.0).contains(&self.evidence_floor) {
            return bad("evidence_floor must lie in [0, 1]");
        }
        self.weights
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        self.sampling
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.sampling.total_samples() < self.n {
            return bad("sampling plan yields fewer candidates than n");
        }
        if self.clustering.restarts == 0 || self.clustering.max_iters == 0 {
            return bad("clustering restarts and max_iters must be positive");
        }
        if self.elo.k_factor <= 0.0 || self.elo.games_per_round == 0 {
            return bad("elo k_factor and games_per_round must be positive");
        }
        for p in [&self.provider, &self.embedder] {
            p.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn kmeans(&self, seed: u64) -> KMeansParams {
        KMeansParams {
            k: self.n,
            seed,
            max_iters: self.clustering.max_iters,
            restarts: self.clustering.restarts,
            tolerance: self.clustering.tolerance,
        }
    }
}
