//! Literature store, retrieval, and the per-chunk likelihood
//! `base × method-match` averaged over a hypothesis's evidence.

mod chunking;
mod store;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chunking::{split_spans, ChunkingConfig, Span};
pub use store::{
    chunk_counts, ingest_corpus, query_text, read_corpus, retrieve_topk, Document, DocumentEntry,
    EvidenceChunk, RetrievedChunk, VectorStore, STORE_FILE, STORE_FORMAT, STORE_VERSION,
};

use crate::hypothesis::HypothesisId;
use crate::providers::parse::{parse_tagged_binary, parse_tagged_scalar, ScalarRange};
use crate::providers::{template, CompletionRequest, Gateway, ProviderError, Purpose};
use crate::scalar::Scalar;
use crate::seed::derive_seed;

#[derive(Debug, Error, PartialEq)]
pub enum EvidenceError {
    #[error("corpus contains no documents")]
    EmptyCorpus,
    #[error("chunk target {target} must exceed overlap {overlap}")]
    InvalidChunking { target: usize, overlap: usize },
    #[error("embedding {doc_id} failed: {source}")]
    Embedding {
        doc_id: String,
        #[source]
        source: ProviderError,
    },
    #[error("vector store is empty")]
    EmptyStore,
    #[error("no evidence to aggregate")]
    EmptyEvidence,
    #[error("vector dimension {got} does not match store dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("scoring chunk {chunk_id} failed: {source}")]
    Scoring {
        chunk_id: String,
        #[source]
        source: ProviderError,
    },
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error("store format: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(String),
}

/// Likelihood of one chunk: the base score, zeroed when the method check
/// fails.
pub fn evidence_likelihood<T: Scalar>(base: T, method_match: bool) -> T {
    if method_match {
        base
    } else {
        T::zero()
    }
}

/// Arithmetic mean of per-chunk likelihoods.
pub fn aggregate_likelihood<T: Scalar>(contributions: &[T]) -> Result<T, EvidenceError> {
    if contributions.is_empty() {
        return Err(EvidenceError::EmptyEvidence);
    }
    let sum = contributions.iter().fold(T::zero(), |a, &b| a + b);
    let count = contributions.iter().fold(T::zero(), |a, _| a + T::one());
    Ok(sum / count)
}

/// Shared context for the two evidence prompts.
#[derive(Debug, Clone, Copy)]
pub struct ScoringContext<'a> {
    pub question: &'a str,
    pub keyword: &'a str,
    pub temperature: f64,
    pub seed: u64,
    /// Validation round, passed to the provider as a tag.
    pub round: u32,
}

fn request(
    gateway: &Gateway,
    template_id: &str,
    purpose: Purpose,
    bindings: &BTreeMap<&str, &str>,
    ctx: &ScoringContext<'_>,
    hypothesis: &str,
    chunk_id: &str,
) -> Result<CompletionRequest, ProviderError> {
    let prompt = gateway.templates().render(template_id, bindings)?;
    Ok(CompletionRequest::new(purpose, prompt, ctx.temperature)
        .with_seed(ctx.seed)
        .with_tag("hypothesis", hypothesis)
        .with_tag("chunk", chunk_id)
        .with_tag("round", ctx.round.to_string()))
}

/// How well a chunk supports a hypothesis, clamped to `[0, 1]`.
pub fn score_base_likelihood(
    hypothesis: &str,
    chunk: &RetrievedChunk,
    ctx: &ScoringContext<'_>,
    gateway: &Gateway,
) -> Result<f64, ProviderError> {
    let bindings: BTreeMap<&str, &str> = [
        ("hypothesis", hypothesis),
        ("keyword_content", ctx.keyword),
        ("knowledge_content", chunk.text.as_str()),
    ]
    .into_iter()
    .collect();
    let req = request(
        gateway,
        template::BASE_LIKELIHOOD,
        Purpose::BaseLikelihood,
        &bindings,
        ctx,
        hypothesis,
        &chunk.chunk_id,
    )?;
    gateway.call_parsed(&req, |text| parse_tagged_scalar(text, "base_LH", ScalarRange::UNIT, true))
}

/// Whether a chunk's method fits the hypothesis. Anything but 0 or 1 is a
/// parse error.
pub fn score_method_match(
    hypothesis: &str,
    chunk: &RetrievedChunk,
    ctx: &ScoringContext<'_>,
    gateway: &Gateway,
) -> Result<bool, ProviderError> {
    let bindings: BTreeMap<&str, &str> = [
        ("hypothesis", hypothesis),
        ("question", ctx.question),
        ("keyword_content", ctx.keyword),
        ("knowledge_content", chunk.text.as_str()),
    ]
    .into_iter()
    .collect();
    let req = request(
        gateway,
        template::METHOD_MATCH,
        Purpose::MethodMatch,
        &bindings,
        ctx,
        hypothesis,
        &chunk.chunk_id,
    )?;
    gateway.call_parsed(&req, |text| parse_tagged_binary(text, "match"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodRecord {
    pub base: f64,
    pub method_match: bool,
    pub contribution: f64,
}

impl LikelihoodRecord {
    pub fn new(base: f64, method_match: bool) -> Self {
        Self {
            base,
            method_match,
            contribution: evidence_likelihood(base, method_match),
        }
    }
}

/// Retrieved chunks for one hypothesis with their likelihood records, in
/// descending similarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceSet {
    pub hypothesis: HypothesisId,
    pub chunks: Vec<RetrievedChunk>,
    pub records: Vec<LikelihoodRecord>,
}

impl EvidenceSet {
    pub fn contributions(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.contribution).collect()
    }

    /// Mean contribution, or `None` when nothing was retrieved.
    pub fn likelihood(&self) -> Option<f64> {
        aggregate_likelihood(&self.contributions()).ok()
    }

    /// Mean contribution, falling back to `floor` for an empty set.
    pub fn likelihood_or(&self, floor: f64) -> f64 {
        self.likelihood().unwrap_or(floor)
    }
}

/// Scores every retrieved chunk for one hypothesis. Calls for different
/// chunks run concurrently under the gateway's cap; each chunk gets its own
/// derived seed.
pub fn assess_evidence(
    hypothesis: &HypothesisId,
    text: &str,
    chunks: Vec<RetrievedChunk>,
    ctx: &ScoringContext<'_>,
    gateway: &Gateway,
) -> Result<EvidenceSet, EvidenceError> {
    let scored = gateway.fan_out(&chunks, |chunk| {
        let chunk_ctx = ScoringContext {
            seed: derive_seed(ctx.seed, &format!("{hypothesis}/{}", chunk.chunk_id), 0),
            ..*ctx
        };
        let wrap = |source| EvidenceError::Scoring {
            chunk_id: chunk.chunk_id.clone(),
            source,
        };
        let base = score_base_likelihood(text, chunk, &chunk_ctx, gateway).map_err(wrap)?;
        let matched = score_method_match(text, chunk, &chunk_ctx, gateway).map_err(wrap)?;
        Ok(LikelihoodRecord::new(base, matched))
    });
    let records = scored.into_iter().collect::<Result<Vec<_>, EvidenceError>>()?;
    Ok(EvidenceSet {
        hypothesis: hypothesis.clone(),
        chunks,
        records,
    })
}
