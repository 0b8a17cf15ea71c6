//! Gateway to the language and embedding models.
//!
//! All generation, scoring, classification and embedding traffic goes through
//! the [`TextProvider`] and [`Embedder`] traits. [`Gateway`] wraps a text
//! provider with the retry policy, the global in-flight cap and the transcript
//! log. [`MockProvider`] answers every request deterministically from a seed,
//! and [`HttpProvider`] speaks the chat-completion wire format.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod gateway;
mod http;
mod mock;
pub mod parse;
mod scoring;
pub mod template;

pub use gateway::{Gateway, TranscriptRecord};
pub use http::{chat_request_body, parse_chat_response, HttpEmbedder, HttpProvider};
pub use mock::{MockEmbedder, MockProvider, Responder};
pub use parse::{ParseError, ScalarRange};
pub use scoring::{score_nrf, NrfDimension, NrfError};
pub use template::{PromptTemplate, RenderedPrompt, TemplateError, TemplateRegistry};

/// What a completion request is for. Real providers ignore it; the mock uses
/// it to pick an answer format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Generate,
    Novelty,
    Relevance,
    Feasibility,
    BaseLikelihood,
    MethodMatch,
    Refine,
    Judge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub purpose: Purpose,
    pub system: String,
    pub user: String,
    pub temperature: f64,
    /// Sampling seed forwarded to the provider when it supports one.
    pub seed: Option<u64>,
    /// Structured context (hypothesis text, requested strategy, ...) for
    /// logging and for scripted test providers. Never sent over the wire.
    pub tags: BTreeMap<String, String>,
}

impl CompletionRequest {
    pub fn new(purpose: Purpose, prompt: RenderedPrompt, temperature: f64) -> Self {
        Self {
            purpose,
            system: prompt.system,
            user: prompt.user,
            temperature,
            seed: None,
            tags: BTreeMap::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_tag(mut self, key: &str, value: impl Into<String>) -> Self {
        self.tags.insert(key.to_string(), value.into());
        self
    }

    pub fn tag(&self, key: &str) -> Option<&str> {
        self.tags.get(key).map(String::as_str)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected provider response: {0}")]
    InvalidResponse(String),
    #[error("credential variable `{0}` is not set")]
    MissingCredential(String),
    #[error("scripted responses exhausted")]
    ScriptExhausted,
    #[error("embedding batch is empty")]
    EmptyInput,
    #[error("embedding dimension {got} differs from {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unreadable {purpose:?} response after {attempts} attempt(s): {source}")]
    Parse {
        purpose: Purpose,
        attempts: u32,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("invalid provider configuration: {0}")]
    Config(String),
}

impl ProviderError {
    /// Failures worth re-querying for.
    pub fn is_transient(&self) -> bool {
        matches!(
            self,
            ProviderError::Transport(_)
                | ProviderError::Http { .. }
                | ProviderError::InvalidResponse(_)
        )
    }
}

/// A chat-style text model.
pub trait TextProvider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError>;
}

/// A sentence embedding model.
pub trait Embedder: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError>;

    /// Identifies the model so stores built with one embedder are not queried
    /// with another.
    fn descriptor(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Base URL of an OpenAI-compatible API, e.g. `http://localhost:8000/v1`.
    pub endpoint: String,
    pub model: String,
    pub embedding_model: String,
    pub timeout_secs: u64,
    /// Extra attempts after the first, for transport and parse failures.
    pub retry_budget: u32,
    pub max_parallel: usize,
    pub temperature: f64,
    /// Environment variable holding the API key.
    pub api_key_env: Option<String>,
    /// Seed of the mock provider; the run seed is used when absent.
    pub mock_seed: Option<u64>,
    pub mock_dimension: usize,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            endpoint: "http://localhost:8000/v1".into(),
            model: "gpt-4o-mini".into(),
            embedding_model: "text-embedding-3-small".into(),
            timeout_secs: 120,
            retry_budget: 2,
            max_parallel: 4,
            temperature: 0.7,
            api_key_env: None,
            mock_seed: None,
            mock_dimension: 64,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.max_parallel == 0 {
            return Err(ProviderError::Config("max_parallel must be at least 1".into()));
        }
        if self.kind == ProviderKind::Mock && self.mock_dimension == 0 {
            return Err(ProviderError::Config("mock_dimension must be positive".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(ProviderError::Config("temperature must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn api_key(&self) -> Result<Option<String>, ProviderError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(v) if !v.is_empty() => Ok(Some(v)),
                _ => Err(ProviderError::MissingCredential(var.clone())),
            },
        }
    }
}
