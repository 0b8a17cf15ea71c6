//! Initial hypothesis set: sample many candidates at several temperatures,
//! embed them, cluster, and keep the member nearest each centroid.

mod kmeans;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kmeans::{
    kmeans_cluster, kmeans_cluster_traced, select_representatives, ClusterAssignment,
    ClusterError, KMeansParams,
};

use crate::hypothesis::{GenerationTag, Hypothesis, IdAllocator};
use crate::linalg::l2_normalize;
use crate::providers::{template, CompletionRequest, Embedder, Gateway, ProviderError, Purpose};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingRound {
    pub temperature: f64,
    #[serde(default = "default_template")]
    pub template: String,
    pub samples: usize,
}

fn default_template() -> String {
    template::GENERATE.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SamplingPlan {
    pub rounds: Vec<SamplingRound>,
}

impl Default for SamplingPlan {
    /// Three rounds at 0.7, 1.0 and 1.3 with ten samples each.
    fn default() -> Self {
        Self::uniform(&[0.7, 1.0, 1.3], 10)
    }
}

impl SamplingPlan {
    pub fn uniform(temperatures: &[f64], samples: usize) -> Self {
        Self {
            rounds: temperatures
                .iter()
                .map(|&temperature| SamplingRound {
                    temperature,
                    template: default_template(),
                    samples,
                })
                .collect(),
        }
    }

    pub fn total_samples(&self) -> usize {
        self.rounds.iter().map(|r| r.samples).sum()
    }

    pub fn validate(&self) -> Result<(), ProposalError> {
        if self.rounds.is_empty() {
            return Err(ProposalError::InvalidPlan("no sampling rounds".into()));
        }
        for (i, r) in self.rounds.iter().enumerate() {
            if r.samples == 0 {
                return Err(ProposalError::InvalidPlan(format!("round {i} has zero samples")));
            }
            if !(r.temperature >= 0.0) || !r.temperature.is_finite() {
                return Err(ProposalError::InvalidPlan(format!(
                    "round {i} temperature {} is invalid",
                    r.temperature
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProposalError {
    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),
    #[error("research question is empty")]
    EmptyQuestion,
    #[error("generation round {round} failed: {source}")]
    Provider {
        round: usize,
        #[source]
        source: ProviderError,
    },
    #[error("only {got} distinct candidates, need {needed}")]
    TooFewCandidates { got: usize, needed: usize },
    #[error("embedding failed: {0}")]
    Embedding(#[source] ProviderError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

/// Collapses runs of whitespace so formatting noise does not defeat dedup.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Samples candidates for every round of `plan`. Empty replies and exact
/// duplicates (after whitespace normalization) are dropped, keeping the first
/// occurrence. Fails with `TooFewCandidates` when fewer than `needed`
/// survive.
pub fn generate_candidates(
    question: &str,
    plan: &SamplingPlan,
    gateway: &Gateway,
    seed: u64,
    needed: usize,
    ids: &mut IdAllocator,
) -> Result<Vec<Hypothesis>, ProposalError> {
    if question.trim().is_empty() {
        return Err(ProposalError::EmptyQuestion);
    }
    plan.validate()?;
    let bindings: BTreeMap<&str, &str> = [("research_question", question)].into_iter().collect();
    let mut jobs = Vec::with_capacity(plan.total_samples());
    for (round, r) in plan.rounds.iter().enumerate() {
        let prompt = gateway
            .templates()
            .render(&r.template, &bindings)
            .map_err(|e| ProposalError::Provider { round, source: e.into() })?;
        for sample in 0..r.samples {
            let request = CompletionRequest::new(Purpose::Generate, prompt.clone(), r.temperature)
                .with_seed(derive_seed(seed, &format!("generate/{round}"), sample as u64));
            jobs.push((round, request));
        }
    }
    let replies = gateway.fan_out(&jobs, |(_, request)| gateway.call(request));

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for ((round, _), reply) in jobs.iter().zip(replies) {
        let text = match reply {
            Ok(text) => normalize_whitespace(&text),
            Err(ProviderError::Parse { .. }) => continue,
            Err(source) => return Err(ProposalError::Provider { round: *round, source }),
        };
        if text.is_empty() || !seen.insert(text.clone()) {
            continue;
        }
        let r = &plan.rounds[*round];
        let mut h = Hypothesis::new(ids.allocate(), text).expect("nonempty text");
        h.generation = Some(GenerationTag {
            sampling_round: *round,
            temperature: r.temperature,
            template: r.template.clone(),
        });
        out.push(h);
    }
    if out.len() < needed {
        return Err(ProposalError::TooFewCandidates {
            got: out.len(),
            needed,
        });
    }
    Ok(out)
}

/// Embeds `texts` and L2-normalizes each vector.
pub fn embed_batch(texts: &[String], embedder: &dyn Embedder) -> Result<Vec<Vec<f64>>, ProviderError> {
    if texts.is_empty() {
        return Err(ProviderError::EmptyInput);
    }
    let mut vectors = embedder.embed(texts)?;
    if vectors.len() != texts.len() {
        return Err(ProviderError::InvalidResponse(format!(
            "{} embeddings for {} texts",
            vectors.len(),
            texts.len()
        )));
    }
    let dim = vectors[0].len();
    for v in vectors.iter_mut() {
        if v.len() != dim {
            return Err(ProviderError::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        if !l2_normalize(v) {
            return Err(ProviderError::InvalidResponse("zero-norm embedding".into()));
        }
    }
    Ok(vectors)
}

/// Members nearest each centroid, in cluster order.
pub fn select_hypotheses(
    hypotheses: &[Hypothesis],
    assignment: &ClusterAssignment<f64>,
) -> Result<Vec<Hypothesis>, ClusterError> {
    let vectors: Vec<Vec<f64>> = hypotheses
        .iter()
        .enumerate()
        .map(|(i, h)| {
            h.embedding.clone().ok_or_else(|| {
                ClusterError::MalformedAssignment(format!("hypothesis {i} has no embedding"))
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(select_representatives(&vectors, assignment)?
        .into_iter()
        .map(|i| hypotheses[i].clone())
        .collect())
}

/// What the proposal stage produced, kept for inspection and checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalOutcome {
    pub candidates: Vec<Hypothesis>,
    pub assignment: ClusterAssignment<f64>,
    pub selected: Vec<Hypothesis>,
}

/// Generate, embed, cluster into `n` groups and keep one representative per
/// group.
#[allow(clippy::too_many_arguments)]
pub fn propose(
    question: &str,
    n: usize,
    plan: &SamplingPlan,
    kmeans: &KMeansParams,
    gateway: &Gateway,
    embedder: &dyn Embedder,
    seed: u64,
    ids: &mut IdAllocator,
) -> Result<ProposalOutcome, ProposalError> {
    let mut candidates = generate_candidates(question, plan, gateway, seed, n, ids)?;
    let texts: Vec<String> = candidates.iter().map(|h| h.text.clone()).collect();
    let vectors = embed_batch(&texts, embedder).map_err(ProposalError::Embedding)?;
    for (h, v) in candidates.iter_mut().zip(&vectors) {
        h.embedding = Some(v.clone());
    }
    let params = KMeansParams {
        k: n,
        seed: derive_seed(seed, "kmeans", 0),
        ..kmeans.clone()
    };
    let assignment = kmeans_cluster(&vectors, &params)?;
    let selected = select_hypotheses(&candidates, &assignment)?;
    Ok(ProposalOutcome {
        candidates,
        assignment,
        selected,
    })
}
