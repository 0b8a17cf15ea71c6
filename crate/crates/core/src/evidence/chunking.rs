use serde::{Deserialize, Serialize};

use super::EvidenceError;

/// Segment size and overlap, both counted in characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkingConfig {
    pub target: usize,
    pub overlap: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            target: 1200,
            overlap: 150,
        }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<(), EvidenceError> {
        if self.target == 0 || self.overlap >= self.target {
            return Err(EvidenceError::InvalidChunking {
                target: self.target,
                overlap: self.overlap,
            });
        }
        Ok(())
    }
}

/// Half-open character range `[start, end)` of a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Splits a text of `chars` characters into overlapping windows.
///
/// Each window ends at the last paragraph break (`\n\n`) inside it, provided
/// that break lies far enough in (past `max(target / 2, overlap)`) to keep
/// windows from degenerating. Otherwise the window is cut at exactly
/// `target` characters. The next window starts `overlap` characters before
/// the previous end.
pub fn split_spans(text: &[char], config: &ChunkingConfig) -> Vec<Span> {
    let n = text.len();
    let mut spans = Vec::new();
    if n == 0 {
        return spans;
    }
    let min_len = (config.target / 2).max(config.overlap) + 1;
    let mut start = 0;
    loop {
        let hard_end = (start + config.target).min(n);
        if hard_end == n {
            spans.push(Span { start, end: n });
            break;
        }
        let end = paragraph_end(text, start + min_len, hard_end).unwrap_or(hard_end);
        spans.push(Span { start, end });
        start = end - config.overlap;
    }
    spans
}

/// Largest `e` in `[lo, hi]` with `text[e-2..e] == "\n\n"`.
fn paragraph_end(text: &[char], lo: usize, hi: usize) -> Option<usize> {
    (lo.max(2)..=hi)
        .rev()
        .find(|&e| text[e - 2] == '\n' && text[e - 1] == '\n')
}

/// Byte offset of every char boundary, plus the text length.
pub(crate) fn char_offsets(text: &str) -> Vec<usize> {
    text.char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .collect()
}
