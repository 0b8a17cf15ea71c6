//! Belief distributions over the hypothesis set and the math that moves them:
//! the weighted N/R/F prior, Bayes updates, Shannon and binary entropy.
//!
//! Everything here is pure. Functions are generic over [`Scalar`] (Bayes and
//! prior construction, which also run over exact rationals) or [`Real`]
//! (entropies, which need logarithms).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypothesis::HypothesisId;
use crate::scalar::{Real, Scalar};

#[derive(Debug, Error, PartialEq)]
pub enum BeliefError {
    #[error("hypothesis set is empty")]
    EmptyHypothesisSet,
    #[error("every weighted N/R/F score is zero, prior is undefined")]
    AllZeroScores,
    #[error("{field} score {value} outside [0, 1]")]
    ScoreOutOfRange { field: &'static str, value: f64 },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("beliefs sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("belief for {0} is negative")]
    NegativeBelief(HypothesisId),
    #[error("hypothesis id {0} appears twice")]
    DuplicateId(HypothesisId),
    #[error("expected {expected} likelihoods, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("likelihood {value} at index {index} outside [0, 1]")]
    LikelihoodOutOfRange { index: usize, value: f64 },
    #[error("every likelihood-weighted belief is zero")]
    DegenerateEvidence,
    #[error("belief {0} outside [0, 1]")]
    OutOfRange(f64),
}

fn check_unit<T: Scalar>(field: &'static str, v: T) -> Result<T, BeliefError> {
    if v >= T::zero() && v <= T::one() {
        Ok(v)
    } else {
        Err(BeliefError::ScoreOutOfRange {
            field,
            value: v.to_f64(),
        })
    }
}

/// Novelty, relevance and feasibility of one hypothesis, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple<T> {
    pub novelty: T,
    pub relevance: T,
    pub feasibility: T,
}

impl<T: Scalar> ScoreTriple<T> {
    pub fn new(novelty: T, relevance: T, feasibility: T) -> Result<Self, BeliefError> {
        Ok(Self {
            novelty: check_unit("novelty", novelty)?,
            relevance: check_unit("relevance", relevance)?,
            feasibility: check_unit("feasibility", feasibility)?,
        })
    }

    pub fn validate(&self) -> Result<(), BeliefError> {
        Self::new(self.novelty, self.relevance, self.feasibility).map(|_| ())
    }

    pub fn weighted(&self, w: &WeightConfig<T>) -> T {
        w.alpha * self.novelty + w.beta * self.relevance + w.gamma * self.feasibility
    }
}

/// Importance weights of novelty, relevance and feasibility in the prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
}

impl<T: Scalar> WeightConfig<T> {
    pub fn new(alpha: T, beta: T, gamma: T) -> Result<Self, BeliefError> {
        let w = Self { alpha, beta, gamma };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), BeliefError> {
        let zero = T::zero();
        if self.alpha < zero || self.beta < zero || self.gamma < zero {
            return Err(BeliefError::InvalidWeights("weights must be nonnegative".into()));
        }
        let sum = self.alpha + self.beta + self.gamma;
        if sum.abs_diff(T::one()) > T::normalization_tolerance() {
            return Err(BeliefError::InvalidWeights(format!(
                "weights sum to {}, expected 1",
                sum.to_f64()
            )));
        }
        Ok(())
    }

    /// Equal weights of one third each.
    pub fn uniform() -> Self {
        let three = T::one() + T::one() + T::one();
        let third = T::one() / three;
        Self {
            alpha: third,
            beta: third,
            gamma: third,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefEntry<T> {
    pub id: HypothesisId,
    pub belief: T,
}

/// Probability vector over the current hypothesis set, in slot order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BeliefDistribution<T> {
    entries: Vec<BeliefEntry<T>>,
}

impl<T: Scalar> BeliefDistribution<T> {
    /// Builds a distribution, checking nonnegativity, unique ids and unit sum.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (HypothesisId, T)>,
    ) -> Result<Self, BeliefError> {
        let dist = Self {
            entries: entries
                .into_iter()
                .map(|(id, belief)| BeliefEntry { id, belief })
                .collect(),
        };
        dist.validate()?;
        Ok(dist)
    }

    /// Normalises nonnegative masses into a distribution.
    pub fn from_masses(
        masses: impl IntoIterator<Item = (HypothesisId, T)>,
    ) -> Result<Self, BeliefError> {
        let entries: Vec<(HypothesisId, T)> = masses.into_iter().collect();
        if entries.is_empty() {
            return Err(BeliefError::EmptyHypothesisSet);
        }
        let total = entries.iter().fold(T::zero(), |acc, (_, m)| acc + *m);
        if total <= T::zero() {
            return Err(BeliefError::AllZeroScores);
        }
        Self::from_entries(entries.into_iter().map(|(id, m)| (id, m / total)))
    }

    pub fn uniform(ids: impl IntoIterator<Item = HypothesisId>) -> Result<Self, BeliefError> {
        Self::from_masses(ids.into_iter().map(|id| (id, T::one())))
    }

    pub fn validate(&self) -> Result<(), BeliefError> {
        if self.entries.is_empty() {
            return Err(BeliefError::EmptyHypothesisSet);
        }
        let mut seen = HashSet::with_capacity(self.entries.len());
        let mut sum = T::zero();
        for e in &self.entries {
            if !seen.insert(&e.id) {
                return Err(BeliefError::DuplicateId(e.id.clone()));
            }
            if e.belief < T::zero() {
                return Err(BeliefError::NegativeBelief(e.id.clone()));
            }
            sum = sum + e.belief;
        }
        if sum.abs_diff(T::one()) > T::normalization_tolerance() {
            return Err(BeliefError::NotNormalized { sum: sum.to_f64() });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[BeliefEntry<T>] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = &HypothesisId> {
        self.entries.iter().map(|e| &e.id)
    }

    pub fn beliefs(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.belief).collect()
    }

    pub fn get(&self, id: &HypothesisId) -> Option<T> {
        self.entries.iter().find(|e| &e.id == id).map(|e| e.belief)
    }

    pub fn position(&self, id: &HypothesisId) -> Option<usize> {
        self.entries.iter().position(|e| &e.id == id)
    }

    /// Moves the belief held by `old` onto `new`, keeping its slot.
    pub fn rename(&mut self, old: &HypothesisId, new: HypothesisId) -> bool {
        if self.entries.iter().any(|e| e.id == new) {
            return false;
        }
        match self.entries.iter_mut().find(|e| &e.id == old) {
            Some(e) => {
                e.id = new;
                true
            }
            None => false,
        }
    }

    /// Divides every entry by the current total to absorb rounding drift.
    pub fn renormalize(&mut self) {
        let total = self.entries.iter().fold(T::zero(), |acc, e| acc + e.belief);
        if total > T::zero() {
            self.entries.iter_mut().for_each(|e| e.belief = e.belief / total);
        }
    }
}

/// Prior from weighted N/R/F scores: each hypothesis gets
/// `(a*N + b*R + g*F) / sum_j (a*N_j + b*R_j + g*F_j)`.
pub fn initial_beliefs<T: Scalar>(
    scored: impl IntoIterator<Item = (HypothesisId, ScoreTriple<T>)>,
    weights: &WeightConfig<T>,
) -> Result<BeliefDistribution<T>, BeliefError> {
    weights.validate()?;
    let masses = scored
        .into_iter()
        .map(|(id, s)| {
            s.validate()?;
            Ok((id, s.weighted(weights)))
        })
        .collect::<Result<Vec<_>, BeliefError>>()?;
    let mut dist = BeliefDistribution::from_masses(masses)?;
    dist.renormalize();
    Ok(dist)
}

/// One Bayes step: posterior_i is proportional to `likelihood_i * prior_i`.
pub fn posterior_update<T: Scalar>(
    prior: &BeliefDistribution<T>,
    likelihoods: &[T],
) -> Result<BeliefDistribution<T>, BeliefError> {
    if likelihoods.len() != prior.len() {
        return Err(BeliefError::LengthMismatch {
            expected: prior.len(),
            got: likelihoods.len(),
        });
    }
    for (index, &l) in likelihoods.iter().enumerate() {
        if !(l >= T::zero() && l <= T::one()) {
            return Err(BeliefError::LikelihoodOutOfRange {
                index,
                value: l.to_f64(),
            });
        }
    }
    let products: Vec<T> = prior
        .entries
        .iter()
        .zip(likelihoods)
        .map(|(e, &l)| e.belief * l)
        .collect();
    let evidence = products.iter().fold(T::zero(), |acc, &p| acc + p);
    if evidence <= T::zero() {
        return Err(BeliefError::DegenerateEvidence);
    }
    let mut posterior = BeliefDistribution {
        entries: prior
            .entries
            .iter()
            .zip(products)
            .map(|(e, p)| BeliefEntry {
                id: e.id.clone(),
                belief: p / evidence,
            })
            .collect(),
    };
    posterior.renormalize();
    Ok(posterior)
}

/// `-p log2 p`, with the continuity convention `0 log 0 = 0`.
fn surprisal_term<T: Real>(p: T) -> T {
    if p <= T::zero() {
        T::zero()
    } else {
        -p * p.log2()
    }
}

/// Shannon entropy in bits of a probability vector.
pub fn entropy_bits<T: Real>(probabilities: &[T]) -> T {
    probabilities
        .iter()
        .fold(T::zero(), |acc, &p| acc + surprisal_term(p))
}

pub fn shannon_entropy<T: Real>(dist: &BeliefDistribution<T>) -> T {
    entropy_bits(&dist.beliefs())
}

/// Entropy in bits of a Bernoulli variable with success probability `belief`.
///
/// Evaluated on the canonical pair `(min(b, 1-b), 1 - min(b, 1-b))`, so
/// `S(b) == S(1-b)` bit-for-bit whenever `1 - (1 - b) == b`.
pub fn binary_entropy<T: Real>(belief: T) -> Result<T, BeliefError> {
    if !(belief >= T::zero() && belief <= T::one()) {
        return Err(BeliefError::OutOfRange(belief.to_f64()));
    }
    let low = belief.min(T::one() - belief);
    let high = T::one() - low;
    Ok(surprisal_term(low) + surprisal_term(high))
}

/// Binary entropy of every entry, in slot order.
pub fn binary_entropies<T: Real>(dist: &BeliefDistribution<T>) -> Vec<(HypothesisId, T)> {
    dist.entries
        .iter()
        .map(|e| {
            let s = binary_entropy(e.belief).expect("distribution entries lie in [0, 1]");
            (e.id.clone(), s)
        })
        .collect()
}
