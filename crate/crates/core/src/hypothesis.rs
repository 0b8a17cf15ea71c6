//! Hypothesis records and their refinement lineage.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::ScoreTriple;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HypothesisId(String);

impl HypothesisId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    /// Sequential id; zero padding keeps lexical and numeric order aligned.
    pub fn sequential(n: u64) -> Self {
        Self(format!("h{n:04}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for HypothesisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for HypothesisId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// The three rewrite strategies applied to uncertain hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Deepening,
    Counterfactual,
    Hybridization,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [
        Strategy::Deepening,
        Strategy::Counterfactual,
        Strategy::Hybridization,
    ];

    /// Letter used by the refinement prompt's answer format.
    pub fn letter(self) -> char {
        match self {
            Strategy::Deepening => 'A',
            Strategy::Counterfactual => 'B',
            Strategy::Hybridization => 'C',
        }
    }

    pub fn from_letter(letter: char) -> Option<Self> {
        match letter {
            'A' => Some(Strategy::Deepening),
            'B' => Some(Strategy::Counterfactual),
            'C' => Some(Strategy::Hybridization),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Deepening => "Deepening",
            Strategy::Counterfactual => "Counterfactual",
            Strategy::Hybridization => "Hybridization",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageStep {
    pub round: u32,
    pub strategy: Strategy,
    pub parents: Vec<HypothesisId>,
}

/// Which sampling round of the proposal stage produced a candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationTag {
    pub sampling_round: usize,
    pub temperature: f64,
    pub template: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum HypothesisError {
    #[error("hypothesis text is empty")]
    EmptyText,
    #[error("lineage round {new} does not follow round {last}")]
    NonIncreasingLineage { last: u32, new: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: HypothesisId,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<ScoreTriple<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lineage: Vec<LineageStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenerationTag>,
}

impl Hypothesis {
    pub fn new(id: HypothesisId, text: impl Into<String>) -> Result<Self, HypothesisError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(HypothesisError::EmptyText);
        }
        Ok(Self {
            id,
            text,
            scores: None,
            lineage: Vec::new(),
            embedding: None,
            generation: None,
        })
    }

    pub fn push_lineage(&mut self, step: LineageStep) -> Result<(), HypothesisError> {
        if let Some(last) = self.lineage.last() {
            if step.round <= last.round {
                return Err(HypothesisError::NonIncreasingLineage {
                    last: last.round,
                    new: step.round,
                });
            }
        }
        self.lineage.push(step);
        Ok(())
    }

    /// Every id this hypothesis descends from, over its recorded lineage.
    pub fn ancestors(&self) -> impl Iterator<Item = &HypothesisId> {
        self.lineage.iter().flat_map(|s| s.parents.iter())
    }
}

/// Hands out run-unique hypothesis ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdAllocator {
    next: u64,
}

impl IdAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allocate(&mut self) -> HypothesisId {
        let id = HypothesisId::sequential(self.next);
        self.next += 1;
        id
    }

    pub fn peek(&self) -> u64 {
        self.next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_rejected() {
        assert_eq!(
            Hypothesis::new("h".into(), "   ").unwrap_err(),
            HypothesisError::EmptyText
        );
    }

    #[test]
    fn lineage_rounds_must_increase() {
        let mut h = Hypothesis::new("h".into(), "x").unwrap();
        let step = |round| LineageStep {
            round,
            strategy: Strategy::Deepening,
            parents: vec!["p".into()],
        };
        h.push_lineage(step(2)).unwrap();
        assert!(h.push_lineage(step(2)).is_err());
        h.push_lineage(step(3)).unwrap();
        assert_eq!(h.ancestors().count(), 2);
    }

    #[test]
    fn strategy_letters_round_trip() {
        for s in Strategy::ALL {
            assert_eq!(Strategy::from_letter(s.letter()), Some(s));
        }
        assert_eq!(Strategy::from_letter('D'), None);
    }

    #[test]
    fn allocator_ids_sort_numerically() {
        let mut ids = IdAllocator::new();
        let a: Vec<_> = (0..12).map(|_| ids.allocate()).collect();
        let mut sorted = a.clone();
        sorted.sort();
        assert_eq!(a, sorted);
        assert_eq!(a[10].as_str(), "h0010");
    }
}
