//! Offline stand-in for the language and embedding models.
//!
//! Answers are pure functions of the seed and the request, so concurrent
//! fan-out cannot change them. A FIFO script and a responder closure can
//! override the defaults for tests that need exact replies.

use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, Mutex};

use rand::Rng;
use serde_json::json;

use super::{CompletionRequest, Embedder, ProviderError, Purpose, TextProvider};
use crate::hypothesis::Strategy;
use crate::seed::{rng_for, stable_hash, unit_interval};

/// Test hook: return `Some(reply)` to answer a request, `None` to fall back to
/// the seeded default.
pub type Responder = Arc<dyn Fn(&CompletionRequest) -> Option<String> + Send + Sync>;

const THEMES: [&[&str]; 6] = [
    &["meta-learning", "adapters", "few-shot", "initialization", "inner-loop", "gradients", "consolidation", "episodic", "rapid", "fast-weights"],
    &["retrieval", "memory", "index", "nearest-neighbour", "cache", "key-value", "lookup", "external", "datastore", "grounding"],
    &["synthetic", "augmentation", "paraphrase", "entity", "graph", "rewriting", "corpus", "diversity", "generation", "relations"],
    &["sparsity", "pruning", "low-rank", "factorized", "compression", "parameter-efficient", "subspace", "rank", "masks", "distillation"],
    &["curriculum", "replay", "forgetting", "continual", "regularization", "rehearsal", "stability", "plasticity", "schedule", "consolidation"],
    &["probing", "attribution", "causal", "intervention", "circuits", "neurons", "localization", "editing", "mechanistic", "tracing"],
];

const CONNECTIVES: [&str; 8] = [
    "improves", "stabilizes", "accelerates", "explains", "predicts", "controls", "enables", "sharpens",
];

const OUTCOMES: [&str; 6] = [
    "factual recall", "sample efficiency", "robustness", "generalization", "calibration", "retention",
];

/// Marker the mock appends when it refines a hypothesis.
const REFINE_MARKER: &str = " || ";

fn tokens(text: &str) -> BTreeMap<String, u32> {
    let mut counts = BTreeMap::new();
    for tok in text
        .split(|c: char| !c.is_alphanumeric() && c != '-')
        .filter(|t| !t.is_empty())
    {
        *counts.entry(tok.to_lowercase()).or_insert(0) += 1;
    }
    counts
}

/// Seeded hash-projection embedder over the token multiset of a text.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    seed: u64,
    dimension: usize,
}

impl MockEmbedder {
    pub fn new(seed: u64, dimension: usize) -> Self {
        Self {
            seed,
            dimension: dimension.max(1),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn token_vector(&self, token: &str) -> Vec<f64> {
        let mut rng = rng_for(self.seed, &format!("embed:{token}"), 0);
        (0..self.dimension).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut counts = tokens(text);
        if counts.is_empty() {
            counts.insert("\u{0}empty".into(), 1);
        }
        let mut v = vec![0.0; self.dimension];
        for (tok, count) in &counts {
            for (acc, x) in v.iter_mut().zip(self.token_vector(tok)) {
                *acc += f64::from(*count) * x;
            }
        }
        if !crate::linalg::l2_normalize(&mut v) {
            v[0] = 1.0;
        }
        v
    }
}

impl Embedder for MockEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        if texts.is_empty() {
            return Err(ProviderError::EmptyInput);
        }
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }

    fn descriptor(&self) -> String {
        format!("mock-hash-projection/seed={}/dim={}", self.seed, self.dimension)
    }
}

pub struct MockProvider {
    seed: u64,
    script: Option<Mutex<VecDeque<String>>>,
    responder: Option<Responder>,
    embedder: MockEmbedder,
}

impl std::fmt::Debug for MockProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockProvider")
            .field("seed", &self.seed)
            .field("scripted", &self.script.is_some())
            .field("responder", &self.responder.is_some())
            .finish()
    }
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            script: None,
            responder: None,
            embedder: MockEmbedder::new(seed, 64),
        }
    }

    pub fn with_dimension(mut self, dimension: usize) -> Self {
        self.embedder = MockEmbedder::new(self.seed, dimension);
        self
    }

    /// Replies consumed in call order; once empty, every call fails with
    /// [`ProviderError::ScriptExhausted`].
    pub fn with_script<I, S>(mut self, replies: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.script = Some(Mutex::new(replies.into_iter().map(Into::into).collect()));
        self
    }

    pub fn with_responder(mut self, responder: Responder) -> Self {
        self.responder = Some(responder);
        self
    }

    pub fn embedder(&self) -> &MockEmbedder {
        &self.embedder
    }

    fn hash(&self, label: &str, parts: &[&str], request_seed: Option<u64>) -> u64 {
        let mut bytes: Vec<&[u8]> = vec![label.as_bytes()];
        bytes.extend(parts.iter().map(|p| p.as_bytes()));
        let seed = self.seed.to_le_bytes();
        let rseed = request_seed.unwrap_or(0).to_le_bytes();
        bytes.push(&seed);
        bytes.push(&rseed);
        stable_hash(&bytes)
    }

    /// Latent quality the mock assigns a hypothesis text: a seeded draw for
    /// the original wording plus a bonus per refinement it has been through.
    pub fn quality(&self, text: &str) -> f64 {
        let mut parts = text.split(REFINE_MARKER);
        let core = parts.next().unwrap_or_default().trim();
        let refinements = parts.count().min(4) as f64;
        0.75 * unit_interval(self.hash("quality", &[core], None)) + 0.06 * refinements
    }

    fn subject<'a>(&self, request: &'a CompletionRequest) -> &'a str {
        request.tag("hypothesis").unwrap_or(&request.user)
    }

    fn generate(&self, request: &CompletionRequest) -> String {
        let h = self.hash("generate", &[&request.user], request.seed)
            ^ request.temperature.to_bits();
        let mut rng = rng_for(h, "generate", 0);
        let theme = THEMES[rng.random_range(0..THEMES.len())];
        let pick = |rng: &mut rand_chacha::ChaCha8Rng| theme[rng.random_range(0..theme.len())];
        let (a, b, c, d) = (pick(&mut rng), pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let verb = CONNECTIVES[rng.random_range(0..CONNECTIVES.len())];
        let outcome = OUTCOMES[rng.random_range(0..OUTCOMES.len())];
        let tag: u32 = rng.random_range(0..100_000);
        format!(
            "We hypothesize that combining {a} with {b} {verb} {outcome}, because {c} \
             interacts with {d} under sparse supervision (variant {tag})."
        )
    }

    fn scalar_reply(&self, tag: &str, value: f64) -> String {
        format!("Assessment follows the rubric. <{tag}>{value:.3}</{tag}>")
    }

    fn default_reply(&self, request: &CompletionRequest) -> String {
        match request.purpose {
            Purpose::Generate => self.generate(request),
            Purpose::Novelty | Purpose::Relevance | Purpose::Feasibility => {
                let tag = match request.purpose {
                    Purpose::Novelty => "novelty",
                    Purpose::Relevance => "relevance",
                    _ => "feasibility",
                };
                let u = unit_interval(self.hash(tag, &[self.subject(request)], None));
                self.scalar_reply(tag, 0.1 + 0.8 * u)
            }
            Purpose::BaseLikelihood => {
                let subject = self.subject(request);
                let noise = unit_interval(self.hash("base", &[&request.user], request.seed)) - 0.5;
                let value = (self.quality(subject) + 0.3 * noise).clamp(0.0, 1.0);
                self.scalar_reply("base_LH", value)
            }
            Purpose::MethodMatch => {
                let subject = self.subject(request);
                let u = unit_interval(self.hash("match", &[&request.user], request.seed));
                let matched = u < 0.55 + 0.4 * self.quality(subject);
                format!("<match>{}</match>", u8::from(matched))
            }
            Purpose::Refine => {
                let letter = request
                    .tag("strategy")
                    .and_then(|s| s.chars().next())
                    .unwrap_or('A');
                let name = Strategy::from_letter(letter).map_or("Deepening", Strategy::name);
                let subject = self.subject(request);
                let mut rng = rng_for(self.hash("refine", &[subject], request.seed), "refine", 0);
                let outcome = OUTCOMES[rng.random_range(0..OUTCOMES.len())];
                let text = format!(
                    "{subject}{REFINE_MARKER}{name}: the effect on {outcome} is measured with a controlled ablation."
                );
                json!({ "optimized hypothesis": text, "strategy": letter.to_string() }).to_string()
            }
            Purpose::Judge => {
                let a = request.tag("hypothesis_a").unwrap_or_default();
                let b = request.tag("hypothesis_b").unwrap_or_default();
                let winner = if self.quality(a) >= self.quality(b) { "A" } else { "B" };
                format!("<winner>{winner}</winner>")
            }
        }
    }
}

impl TextProvider for MockProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        if let Some(script) = &self.script {
            return script
                .lock()
                .unwrap()
                .pop_front()
                .ok_or(ProviderError::ScriptExhausted);
        }
        if let Some(reply) = self.responder.as_ref().and_then(|r| r(request)) {
            return Ok(reply);
        }
        Ok(self.default_reply(request))
    }
}

impl Embedder for MockProvider {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        self.embedder.embed(texts)
    }

    fn descriptor(&self) -> String {
        self.embedder.descriptor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;
    use crate::providers::parse::{parse_refinement_json, parse_tagged_binary, parse_tagged_scalar, parse_verdict, ScalarRange};
    use crate::providers::RenderedPrompt;

    fn req(purpose: Purpose, user: &str) -> CompletionRequest {
        CompletionRequest::new(
            purpose,
            RenderedPrompt {
                system: String::new(),
                user: user.into(),
            },
            0.7,
        )
    }

    #[test]
    fn same_seed_same_replies() {
        let a = MockProvider::new(3);
        let b = MockProvider::new(3);
        for p in [Purpose::Generate, Purpose::Novelty, Purpose::BaseLikelihood, Purpose::MethodMatch, Purpose::Refine, Purpose::Judge] {
            let r = req(p, "question?").with_seed(11);
            assert_eq!(a.complete(&r).unwrap(), b.complete(&r).unwrap());
        }
        assert_ne!(
            a.complete(&req(Purpose::Generate, "q").with_seed(1)).unwrap(),
            a.complete(&req(Purpose::Generate, "q").with_seed(2)).unwrap()
        );
    }

    #[test]
    fn defaults_use_valid_formats() {
        let m = MockProvider::new(9);
        for seed in 0..20 {
            let s = |p| m.complete(&req(p, "text").with_seed(seed).with_tag("hypothesis", "h")).unwrap();
            parse_tagged_scalar(&s(Purpose::Novelty), "novelty", ScalarRange::UNIT, false).unwrap();
            parse_tagged_scalar(&s(Purpose::Relevance), "relevance", ScalarRange::UNIT, false).unwrap();
            parse_tagged_scalar(&s(Purpose::Feasibility), "feasibility", ScalarRange::UNIT, false).unwrap();
            parse_tagged_scalar(&s(Purpose::BaseLikelihood), "base_LH", ScalarRange::UNIT, false).unwrap();
            parse_tagged_binary(&s(Purpose::MethodMatch), "match").unwrap();
            parse_verdict(&s(Purpose::Judge)).unwrap();
        }
        let r = m
            .complete(&req(Purpose::Refine, "x").with_tag("strategy", "B").with_tag("hypothesis", "Old idea."))
            .unwrap();
        let reply = parse_refinement_json(&r).unwrap();
        assert_eq!(reply.strategy, Strategy::Counterfactual);
        assert!(reply.hypothesis.starts_with("Old idea."));
        assert!(m.quality(&reply.hypothesis) > m.quality("Old idea."));
    }

    #[test]
    fn script_consumed_in_order() {
        let m = MockProvider::new(0).with_script(["one", "two"]);
        let r = req(Purpose::Generate, "q");
        assert_eq!(m.complete(&r).unwrap(), "one");
        assert_eq!(m.complete(&r).unwrap(), "two");
        assert_eq!(m.complete(&r), Err(ProviderError::ScriptExhausted));
    }

    #[test]
    fn responder_overrides_defaults() {
        let m = MockProvider::new(0).with_responder(Arc::new(|r: &CompletionRequest| {
            (r.purpose == Purpose::Judge).then(|| "<winner>B</winner>".to_string())
        }));
        assert_eq!(m.complete(&req(Purpose::Judge, "")).unwrap(), "<winner>B</winner>");
        assert!(m.complete(&req(Purpose::Novelty, "")).unwrap().contains("<novelty>"));
    }

    #[test]
    fn embeddings_deterministic_and_unit() {
        let e = MockEmbedder::new(5, 32);
        let v = e.embed(&["abc".into(), "abc".into(), "".into(), "a b b c".into()]).unwrap();
        assert_eq!(v[0], v[1]);
        for x in &v {
            assert_eq!(x.len(), 32);
            assert!((norm(x) - 1.0).abs() < 1e-12);
        }
        // Token multiset, not order.
        assert_eq!(e.embed_one("b a c b"), v[3]);
        assert_eq!(e.embed(&[]), Err(ProviderError::EmptyInput));
    }
}
