//! Self-contained end-to-end run: a small built-in corpus, mock providers and
//! no network access.

use std::path::Path;

use super::{build_embedder, execute, PipelineError, RunConfig, RunDir, RunState, Services};
use crate::evidence::{ingest_corpus, ChunkingConfig, Document, VectorStore};
use crate::proposal::SamplingPlan;

pub const QUESTION: &str =
    "How can a pretrained language model absorb new factual knowledge without forgetting what it already knows?";

pub const REFERENCE: &str = "We study continued training of language models on streams of new facts. \
A small retrieval memory is paired with low-rank adapters: facts are first written to the memory, and \
only those the model repeatedly fails to recall are distilled into the adapters through a replay \
curriculum. On a benchmark of dated encyclopedia edits the method raises recall of new facts by 18 \
points while keeping accuracy on older facts within one point of the frozen model.";

const CORPUS: [(&str, &str, &str); 6] = [
    (
        "adapters",
        "Adapter capacity and fact storage",
        "Low-rank adapters add a small number of trainable parameters beside frozen weights. \
When a model is tuned on a batch of new facts through such adapters, recall of the new facts \
rises quickly while the frozen backbone keeps most earlier behaviour intact.\n\n\
Capacity is the main limit. Rank-four adapters saturate after a few thousand facts, and beyond \
that point new writes start to overwrite older adapter content. Raising the rank delays the \
saturation but also increases interference with unrelated tasks.\n\n\
Adapters attached to the middle feed-forward layers store facts more reliably than adapters on \
attention projections, which suggests those layers act as key-value stores.",
    ),
    (
        "replay",
        "Replay schedules against forgetting",
        "Continual training on new documents erodes older knowledge unless earlier material is \
revisited. Mixing a small fraction of replayed examples into each update keeps retention of \
older facts high.\n\n\
The schedule matters more than the volume. Spaced replay, where an item returns after growing \
intervals, retains more than uniform replay at the same budget. Items the model already answers \
correctly can be skipped, which concentrates the budget on fragile facts.\n\n\
Replay does not help when the new and old facts directly contradict each other; there the \
model must be told which version is current.",
    ),
    (
        "retrieval",
        "External memory as an alternative to weight updates",
        "Instead of writing facts into weights, a model can consult an external datastore at \
inference time. Nearest-neighbour lookup over passage embeddings returns supporting text that \
is placed in the prompt.\n\n\
Retrieval makes updates cheap and reversible: adding a fact is an index insertion. The cost is \
latency and a dependence on the retriever, which misses paraphrased queries. Models also \
sometimes ignore retrieved text that conflicts with what their weights encode.\n\n\
Hybrid designs keep frequently used facts in the weights and rare ones in the datastore.",
    ),
    (
        "probing",
        "Locating facts inside the network",
        "Causal tracing corrupts the input and restores single hidden states to find where a \
fact is recalled. For subject-relation-object facts the decisive states sit in middle-layer \
feed-forward blocks at the last subject token.\n\n\
Direct editing of those blocks changes a targeted fact with few side effects when done one fact \
at a time. Mass edits of thousands of facts degrade fluency, because the edits interfere in the \
shared weight matrices.\n\n\
Probing accuracy for a fact correlates with how often the fact appeared during pretraining.",
    ),
    (
        "augmentation",
        "Paraphrase augmentation for knowledge injection",
        "A fact seen in a single phrasing is memorized as a string rather than learned as \
knowledge: the model completes the exact sentence but fails on questions about it. Training on \
several paraphrases of each fact closes most of this gap.\n\n\
Synthetic rewriting with an auxiliary model is an inexpensive source of paraphrases. Diversity \
of entity mentions matters more than sentence count, and questions about the fact are more \
useful than restatements.\n\n\
Augmentation increases the compute needed per fact roughly in proportion to the number of \
paraphrases.",
    ),
    (
        "evaluation",
        "Measuring knowledge acquisition",
        "Evaluations of knowledge injection should separate three quantities: recall of the new \
facts, retention of older facts, and generalization to questions that require combining new and \
old facts.\n\n\
Dated edit streams give a natural benchmark. Each edit has a timestamp, so a model can be \
trained on edits up to a date and tested on questions about them, while a held-out set of older \
facts measures forgetting.\n\n\
Reported gains often vanish when evaluation questions are paraphrased, which indicates surface \
memorization rather than acquired knowledge.",
    ),
];

pub fn corpus() -> Vec<Document> {
    CORPUS
        .iter()
        .map(|(id, title, text)| Document {
            doc_id: (*id).to_string(),
            title: (*title).to_string(),
            text: (*text).to_string(),
        })
        .collect()
}

pub fn chunking() -> ChunkingConfig {
    ChunkingConfig {
        target: 400,
        overlap: 60,
    }
}

/// Demo settings: mock providers, six rounds, small sampling plan.
pub fn config(seed: u64) -> RunConfig {
    let mut c = RunConfig {
        question: QUESTION.into(),
        reference: REFERENCE.into(),
        seed,
        t_max: 6,
        k: 3,
        sampling: SamplingPlan::uniform(&[0.7, 1.0, 1.3], 4),
        ..RunConfig::default()
    };
    c.provider.max_parallel = 4;
    c
}

/// Ingests the built-in corpus with the configured embedder.
pub fn build_store(config: &RunConfig) -> Result<VectorStore, PipelineError> {
    let embedder = build_embedder(&config.embedder)?;
    let mut store = VectorStore::for_embedder(&*embedder, chunking())?;
    ingest_corpus(&mut store, &corpus(), &*embedder)?;
    Ok(store)
}

/// Runs the demo. With `out`, the run directory and the store are written
/// there; otherwise everything stays in memory.
pub fn run_demo(seed: u64, out: Option<&Path>) -> Result<RunState, PipelineError> {
    let config = config(seed);
    let store = build_store(&config)?;
    let state = RunState::new(config.clone())?;
    match out {
        None => {
            let services = Services::from_config(&config)?;
            super::run(config, &services, &store)
        }
        Some(dir) => {
            let run_dir = RunDir::create(dir, &config)?;
            store.save(&dir.join("store"))?;
            let services = Services::from_config(&config)?.with_transcript(run_dir.transcript_sink()?);
            execute(&run_dir, state, &services, &store, None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::RunStatus;

    #[test]
    fn corpus_chunks_cover_every_document() {
        let store = build_store(&config(0)).unwrap();
        for (id, ..) in CORPUS {
            assert!(store.chunks.iter().filter(|c| c.doc_id == id).count() >= 2, "{id}");
        }
        store.validate().unwrap();
    }

    #[test]
    fn demo_finishes_and_is_reproducible() {
        let a = run_demo(7, None).unwrap();
        assert!(a.status.is_terminal() && a.status != RunStatus::Failed, "{:?}", a.failure);
        a.verify().unwrap();
        assert_eq!(run_demo(7, None).unwrap().to_json(), a.to_json());
    }
}
