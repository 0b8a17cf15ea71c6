use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::parse::{parse_tagged_scalar, ScalarRange};
use super::template;
use super::{CompletionRequest, Gateway, ProviderError, Purpose};
use crate::belief::ScoreTriple;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NrfDimension {
    Novelty,
    Relevance,
    Feasibility,
}

impl fmt::Display for NrfDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NrfDimension::Novelty => "novelty",
            NrfDimension::Relevance => "relevance",
            NrfDimension::Feasibility => "feasibility",
        })
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("{dimension} scoring failed: {source}")]
pub struct NrfError {
    pub dimension: NrfDimension,
    #[source]
    pub source: ProviderError,
}

/// Scores a hypothesis on novelty, relevance and feasibility with three
/// independent calls. Replies are clamped to `[0, 1]`.
pub fn score_nrf(
    hypothesis: &str,
    question: &str,
    keyword: &str,
    gateway: &Gateway,
    temperature: f64,
) -> Result<ScoreTriple<f64>, NrfError> {
    let bindings: BTreeMap<&str, &str> = [
        ("hypothesis", hypothesis),
        ("question", question),
        ("keyword_content", keyword),
    ]
    .into_iter()
    .collect();
    let one = |dimension, template_id, purpose, tag: &str| {
        let fail = |source| NrfError { dimension, source };
        let prompt = gateway
            .templates()
            .render(template_id, &bindings)
            .map_err(|e| fail(e.into()))?;
        let request = CompletionRequest::new(purpose, prompt, temperature)
            .with_tag("hypothesis", hypothesis);
        gateway
            .call_parsed(&request, |text| {
                parse_tagged_scalar(text, tag, ScalarRange::UNIT, true)
            })
            .map_err(fail)
    };
    let novelty = one(NrfDimension::Novelty, template::NOVELTY, Purpose::Novelty, "novelty")?;
    let relevance = one(NrfDimension::Relevance, template::RELEVANCE, Purpose::Relevance, "relevance")?;
    let feasibility = one(
        NrfDimension::Feasibility,
        template::FEASIBILITY,
        Purpose::Feasibility,
        "feasibility",
    )?;
    Ok(ScoreTriple::new(novelty, relevance, feasibility).expect("clamped scores lie in [0, 1]"))
}
