use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chunking::{char_offsets, split_spans, ChunkingConfig, Span};
use super::EvidenceError;
use crate::hypothesis::Hypothesis;
use crate::linalg::{cosine, norm};
use crate::proposal::embed_batch;
use crate::providers::Embedder;

pub const STORE_FORMAT: &str = "hypoloop-vector-store";
pub const STORE_VERSION: u32 = 1;
pub const STORE_FILE: &str = "store.json";

/// One corpus record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceChunk {
    pub id: String,
    pub doc_id: String,
    pub span: Span,
    pub text: String,
    pub vector: Vec<f64>,
}

impl EvidenceChunk {
    pub fn chunk_id(doc_id: &str, span: Span) -> String {
        format!("{doc_id}#{}-{}", span.start, span.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentEntry {
    pub doc_id: String,
    pub title: String,
    pub chars: usize,
}

/// Flat in-memory store of embedded chunks with exhaustive cosine search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorStore {
    pub format: String,
    pub version: u32,
    pub dimension: usize,
    pub embedder: String,
    pub chunking: ChunkingConfig,
    pub documents: Vec<DocumentEntry>,
    pub chunks: Vec<EvidenceChunk>,
}

/// A chunk returned by a search, without its vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedChunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub text: String,
    pub similarity: f64,
}

impl VectorStore {
    pub fn new(dimension: usize, embedder: impl Into<String>, chunking: ChunkingConfig) -> Self {
        Self {
            format: STORE_FORMAT.into(),
            version: STORE_VERSION,
            dimension,
            embedder: embedder.into(),
            chunking,
            documents: Vec::new(),
            chunks: Vec::new(),
        }
    }

    /// Empty store sized for `embedder`, whose dimension is learned from one
    /// probe embedding.
    pub fn for_embedder(embedder: &dyn Embedder, chunking: ChunkingConfig) -> Result<Self, EvidenceError> {
        let probe = embedder
            .embed(&["dimension probe".to_string()])
            .map_err(|source| EvidenceError::Embedding {
                doc_id: "probe".into(),
                source,
            })?;
        let dimension = probe.first().map_or(0, Vec::len);
        if dimension == 0 {
            return Err(EvidenceError::Format("embedder returned an empty vector".into()));
        }
        Ok(Self::new(dimension, embedder.descriptor(), chunking))
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Adds a chunk unless one with the same id is already stored. Returns
    /// whether it was added.
    pub fn insert(&mut self, chunk: EvidenceChunk) -> Result<bool, EvidenceError> {
        if chunk.vector.len() != self.dimension {
            return Err(EvidenceError::DimensionMismatch {
                expected: self.dimension,
                got: chunk.vector.len(),
            });
        }
        if chunk.text.trim().is_empty() {
            return Err(EvidenceError::Format(format!("chunk {} has empty text", chunk.id)));
        }
        if self.chunks.iter().any(|c| c.id == chunk.id) {
            return Ok(false);
        }
        self.chunks.push(chunk);
        Ok(true)
    }

    /// Checks header fields, dimensions, unit norms and id uniqueness.
    pub fn validate(&self) -> Result<(), EvidenceError> {
        if self.format != STORE_FORMAT {
            return Err(EvidenceError::Format(format!("unknown store format {:?}", self.format)));
        }
        if self.version != STORE_VERSION {
            return Err(EvidenceError::Format(format!(
                "store version {} is not supported (expected {STORE_VERSION})",
                self.version
            )));
        }
        let mut ids = HashSet::new();
        for c in &self.chunks {
            if c.vector.len() != self.dimension {
                return Err(EvidenceError::DimensionMismatch {
                    expected: self.dimension,
                    got: c.vector.len(),
                });
            }
            if (norm(&c.vector) - 1.0).abs() > 1e-6 {
                return Err(EvidenceError::Format(format!("chunk {} is not unit-norm", c.id)));
            }
            if !ids.insert(c.id.as_str()) {
                return Err(EvidenceError::Format(format!("duplicate chunk id {}", c.id)));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<(), EvidenceError> {
        fs::create_dir_all(dir).map_err(io_err)?;
        let tmp = dir.join(format!("{STORE_FILE}.tmp"));
        let body = serde_json::to_vec(self).map_err(|e| EvidenceError::Format(e.to_string()))?;
        fs::write(&tmp, body).map_err(io_err)?;
        fs::rename(&tmp, dir.join(STORE_FILE)).map_err(io_err)
    }

    pub fn load(dir: &Path) -> Result<Self, EvidenceError> {
        let bytes = fs::read(dir.join(STORE_FILE)).map_err(io_err)?;
        let store: Self =
            serde_json::from_slice(&bytes).map_err(|e| EvidenceError::Format(e.to_string()))?;
        store.validate()?;
        Ok(store)
    }

    /// The `k` chunks most similar to `query`, best first. Ties go to the
    /// smaller chunk id.
    pub fn search(&self, query: &[f64], k: usize) -> Result<Vec<RetrievedChunk>, EvidenceError> {
        if self.chunks.is_empty() {
            return Err(EvidenceError::EmptyStore);
        }
        if query.len() != self.dimension {
            return Err(EvidenceError::DimensionMismatch {
                expected: self.dimension,
                got: query.len(),
            });
        }
        let mut scored: Vec<(f64, &EvidenceChunk)> =
            self.chunks.iter().map(|c| (cosine(query, &c.vector), c)).collect();
        scored.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.1.id.cmp(&b.1.id))
        });
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(similarity, c)| RetrievedChunk {
                chunk_id: c.id.clone(),
                doc_id: c.doc_id.clone(),
                text: c.text.clone(),
                similarity,
            })
            .collect())
    }
}

fn io_err(e: std::io::Error) -> EvidenceError {
    EvidenceError::Io(e.to_string())
}

/// Reads a JSON-lines corpus. Blank lines are skipped.
pub fn read_corpus(path: &Path) -> Result<Vec<Document>, EvidenceError> {
    let file = fs::File::open(path).map_err(io_err)?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| EvidenceError::Corpus {
            line: i + 1,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Chunks, embeds and stores every document. Chunks already present (same
/// document id and span) are skipped, so re-ingesting is a no-op.
pub fn ingest_corpus(
    store: &mut VectorStore,
    documents: &[Document],
    embedder: &dyn Embedder,
) -> Result<usize, EvidenceError> {
    if documents.is_empty() {
        return Err(EvidenceError::EmptyCorpus);
    }
    store.chunking.validate()?;
    let mut added = 0;
    for doc in documents {
        let chars: Vec<char> = doc.text.chars().collect();
        let offsets = char_offsets(&doc.text);
        let mut pending = Vec::new();
        for span in split_spans(&chars, &store.chunking) {
            let id = EvidenceChunk::chunk_id(&doc.doc_id, span);
            let text = &doc.text[offsets[span.start]..offsets[span.end]];
            if text.trim().is_empty() || store.chunks.iter().any(|c| c.id == id) {
                continue;
            }
            pending.push((id, span, text.to_string()));
        }
        if !store.documents.iter().any(|d| d.doc_id == doc.doc_id) {
            store.documents.push(DocumentEntry {
                doc_id: doc.doc_id.clone(),
                title: doc.title.clone(),
                chars: chars.len(),
            });
        }
        if pending.is_empty() {
            continue;
        }
        let texts: Vec<String> = pending.iter().map(|(_, _, t)| t.clone()).collect();
        let vectors = embed_batch(&texts, embedder).map_err(|source| EvidenceError::Embedding {
            doc_id: doc.doc_id.clone(),
            source,
        })?;
        for ((id, span, text), vector) in pending.into_iter().zip(vectors) {
            if store.insert(EvidenceChunk {
                id,
                doc_id: doc.doc_id.clone(),
                span,
                text,
                vector,
            })? {
                added += 1;
            }
        }
    }
    Ok(added)
}

/// Text embedded to find evidence for a hypothesis.
pub fn query_text(hypothesis: &str, question: &str) -> String {
    format!("{hypothesis}\n\n{question}")
}

/// Top-`k` chunks for a hypothesis, queried with its text followed by the
/// research question.
pub fn retrieve_topk(
    store: &VectorStore,
    question: &str,
    hypothesis: &Hypothesis,
    k: usize,
    embedder: &dyn Embedder,
) -> Result<Vec<RetrievedChunk>, EvidenceError> {
    if store.is_empty() {
        return Err(EvidenceError::EmptyStore);
    }
    let query = embed_batch(&[query_text(&hypothesis.text, question)], embedder).map_err(|source| {
        EvidenceError::Embedding {
            doc_id: format!("query:{}", hypothesis.id),
            source,
        }
    })?;
    store.search(&query[0], k)
}

/// Chunk counts per document, for reporting.
pub fn chunk_counts(store: &VectorStore) -> BTreeMap<&str, usize> {
    let mut out = BTreeMap::new();
    for c in &store.chunks {
        *out.entry(c.doc_id.as_str()).or_insert(0) += 1;
    }
    out
}
