//! Scripted mock services shared by the integration tests.

#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use hypoloop::pipeline::{demo, RunConfig, Services};
use hypoloop::proposal::SamplingPlan;
use hypoloop::providers::{CompletionRequest, Gateway, MockEmbedder, MockProvider, Purpose, Responder};

pub const WORDS: [&str; 12] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel", "india", "juliet", "kilo", "lima",
];

pub fn scalar(tag: &str, v: f64) -> String {
    format!("<{tag}>{v}</{tag}>")
}

/// Mock whose generation replies come from `texts` in call order and whose
/// base likelihood comes from `likelihood(hypothesis text, round)`.
pub fn scripted_services(
    texts: Vec<String>,
    likelihood: impl Fn(&str, u32) -> f64 + Send + Sync + 'static,
    flat_scores: bool,
) -> Services {
    let counter = AtomicUsize::new(0);
    let responder: Responder = Arc::new(move |req: &CompletionRequest| {
        let subject = req.tag("hypothesis").unwrap_or_default();
        match req.purpose {
            Purpose::Generate => {
                let i = counter.fetch_add(1, Ordering::SeqCst);
                Some(texts[i % texts.len()].clone())
            }
            Purpose::BaseLikelihood => {
                let round: u32 = req.tag("round").and_then(|r| r.parse().ok()).unwrap_or(0);
                Some(scalar("base_LH", likelihood(subject, round)))
            }
            Purpose::MethodMatch => Some("<match>1</match>".into()),
            Purpose::Novelty if flat_scores => Some(scalar("novelty", 0.5)),
            Purpose::Relevance if flat_scores => Some(scalar("relevance", 0.5)),
            Purpose::Feasibility if flat_scores => Some(scalar("feasibility", 0.5)),
            _ => None,
        }
    });
    let provider = MockProvider::new(11).with_responder(responder);
    // One worker keeps generation calls, and so the counter, in order.
    let gateway = Gateway::new(Arc::new(provider), 1, 1);
    Services::new(gateway, Arc::new(MockEmbedder::new(0, 64)))
}

pub fn scripted_config(n: usize, t_max: u32, tau_s: f64, epsilon_h: f64) -> RunConfig {
    let mut c = demo::config(3);
    c.n = n;
    c.t_max = t_max;
    c.tau_s = tau_s;
    c.epsilon_h = epsilon_h;
    c.sampling = SamplingPlan::uniform(&[1.0], n);
    c.refinement.hybrid_cosine = 2.0;
    c
}
