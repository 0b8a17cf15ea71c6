//! Picks the most uncertain hypotheses and rewrites them with one of three
//! strategies, keeping the set size fixed.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{binary_entropies, binary_entropy, BeliefDistribution, BeliefError, WeightConfig};
use crate::evidence::EvidenceSet;
use crate::hypothesis::{Hypothesis, HypothesisId, LineageStep, Strategy};
use crate::linalg::cosine;
use crate::providers::parse::parse_refinement_json;
use crate::providers::{template, CompletionRequest, Gateway, ProviderError, Purpose};
use crate::scalar::Real;
use crate::seed::derive_seed;

/// Evidence snippets shown to the refinement prompt.
pub const PROMPT_SNIPPETS: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum RefinementError {
    #[error("{strategy:?} needs {needed} target(s), got {got}")]
    Arity {
        strategy: Strategy,
        needed: &'static str,
        got: usize,
    },
    #[error("unknown refinement target {0}")]
    UnknownTarget(HypothesisId),
    #[error("hypothesis {0} is targeted twice")]
    DuplicateTarget(HypothesisId),
    #[error("refining {target} failed: {source}")]
    Provider {
        target: HypothesisId,
        #[source]
        source: ProviderError,
    },
    #[error("hypothesis {0} has no scores to reset its belief from")]
    MissingScores(HypothesisId),
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

/// What a refined hypothesis starts the next round with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefCarryOver {
    /// The successor takes over its parent's belief unchanged.
    #[default]
    Inherit,
    /// The successor gets the initial-belief formula value computed over the
    /// new set's scores; the other beliefs are rescaled to keep unit mass.
    ResetToPrior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementConfig {
    /// Aggregated likelihood below which a hypothesis is rewritten as a
    /// counterfactual.
    pub low_water: f64,
    /// Embedding cosine at or above which two selected hypotheses are merged.
    pub hybrid_cosine: f64,
    /// Refinements per round; `None` means half the set, rounded up.
    pub cap: Option<usize>,
    pub carry_over: BeliefCarryOver,
    pub temperature: f64,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            low_water: 0.2,
            hybrid_cosine: 0.85,
            cap: None,
            carry_over: BeliefCarryOver::Inherit,
            temperature: 0.7,
        }
    }
}

impl RefinementConfig {
    pub fn cap_for(&self, n: usize) -> usize {
        self.cap.unwrap_or(n.div_ceil(2))
    }
}

/// Ids whose binary entropy is at least `tau_s`, most uncertain first. Ties
/// go to the smaller id.
pub fn select_for_refinement<T: Real>(beliefs: &BeliefDistribution<T>, tau_s: T) -> Vec<HypothesisId> {
    let mut picked: Vec<(HypothesisId, T)> = binary_entropies(beliefs)
        .into_iter()
        .filter(|(_, s)| *s >= tau_s)
        .collect();
    picked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    picked.into_iter().map(|(id, _)| id).collect()
}

/// Strategy for one selected hypothesis, plus the merge partner for
/// Hybridization.
///
/// Counterfactual when the evidence likelihood is below the low-water mark;
/// Hybridization when another selected hypothesis lies within the cosine
/// threshold (the closest one is the partner, ties to the smaller id);
/// Deepening otherwise.
pub fn choose_strategy(
    hypothesis: &Hypothesis,
    likelihood: f64,
    peers: &[&Hypothesis],
    config: &RefinementConfig,
) -> (Strategy, Option<HypothesisId>) {
    if likelihood < config.low_water {
        return (Strategy::Counterfactual, None);
    }
    let Some(own) = hypothesis.embedding.as_deref() else {
        return (Strategy::Deepening, None);
    };
    let mut best: Option<(f64, &HypothesisId)> = None;
    for peer in peers {
        if peer.id == hypothesis.id {
            continue;
        }
        let Some(v) = peer.embedding.as_deref() else { continue };
        let c = cosine(own, v);
        if c < config.hybrid_cosine {
            continue;
        }
        let better = match best {
            None => true,
            Some((bc, bid)) => c > bc || (c == bc && &peer.id < bid),
        };
        if better {
            best = Some((c, &peer.id));
        }
    }
    match best {
        Some((_, id)) => (Strategy::Hybridization, Some(id.clone())),
        None => (Strategy::Deepening, None),
    }
}

/// A refinement decided but not yet sent to the provider.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedRefinement {
    pub strategy: Strategy,
    pub targets: Vec<HypothesisId>,
}

/// Walks the selection in order and assigns strategies until the cap is
/// reached. A hypothesis merged as a partner is not refined again, and a
/// merge counts once against the cap.
pub fn plan_refinements(
    selected: &[HypothesisId],
    current: &[Hypothesis],
    likelihoods: &HashMap<HypothesisId, f64>,
    config: &RefinementConfig,
) -> Result<Vec<PlannedRefinement>, RefinementError> {
    let by_id: HashMap<&HypothesisId, &Hypothesis> = current.iter().map(|h| (&h.id, h)).collect();
    let lookup = |id: &HypothesisId| {
        by_id
            .get(id)
            .copied()
            .ok_or_else(|| RefinementError::UnknownTarget(id.clone()))
    };
    let cap = config.cap_for(current.len());
    let mut consumed: HashSet<&HypothesisId> = HashSet::new();
    let mut plan = Vec::new();
    for id in selected {
        if plan.len() >= cap {
            break;
        }
        if consumed.contains(id) {
            continue;
        }
        let h = lookup(id)?;
        let peers = selected
            .iter()
            .filter(|p| !consumed.contains(p))
            .map(lookup)
            .collect::<Result<Vec<_>, _>>()?;
        let likelihood = likelihoods.get(id).copied().unwrap_or(1.0);
        let (strategy, partner) = choose_strategy(h, likelihood, &peers, config);
        consumed.insert(id);
        let mut targets = vec![id.clone()];
        if let Some(p) = partner {
            consumed.insert(by_id.get_key_value(&p).map(|(k, _)| *k).expect("partner is current"));
            targets.push(p);
        }
        plan.push(PlannedRefinement { strategy, targets });
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementAction {
    pub round: u32,
    pub strategy: Strategy,
    pub targets: Vec<HypothesisId>,
    pub produced: Hypothesis,
    /// Strategy letter the provider said it used.
    pub declared: Strategy,
    /// Set when `declared` differs from `strategy`. The text is kept anyway.
    pub mismatch: bool,
}

fn check_arity(strategy: Strategy, got: usize) -> Result<(), RefinementError> {
    let ok = match strategy {
        Strategy::Hybridization => got >= 2,
        _ => got == 1,
    };
    if ok {
        Ok(())
    } else {
        Err(RefinementError::Arity {
            strategy,
            needed: if strategy == Strategy::Hybridization { "2 or more" } else { "exactly 1" },
            got,
        })
    }
}

/// Numbered snippet list from the best-ranked chunks across `evidence`.
pub fn format_snippets(evidence: &[&EvidenceSet]) -> String {
    let mut chunks: Vec<_> = evidence.iter().flat_map(|e| e.chunks.iter()).collect();
    chunks.sort_by(|a, b| {
        b.similarity
            .partial_cmp(&a.similarity)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.chunk_id.cmp(&b.chunk_id))
    });
    let mut seen = HashSet::new();
    let lines: Vec<String> = chunks
        .into_iter()
        .filter(|c| seen.insert(c.chunk_id.as_str()))
        .take(PROMPT_SNIPPETS)
        .enumerate()
        .map(|(i, c)| format!("[{}] {}", i + 1, c.text.split_whitespace().collect::<Vec<_>>().join(" ")))
        .collect();
    if lines.is_empty() {
        "(no evidence retrieved)".into()
    } else {
        format!("\n{}", lines.join("\n"))
    }
}

fn strategy_hint(strategy: Strategy) -> String {
    format!("{}. {}", strategy.letter(), strategy.name())
}

/// Inputs shared by every refinement call in a round.
#[derive(Debug, Clone, Copy)]
pub struct RefineContext<'a> {
    pub question: &'a str,
    pub round: u32,
    pub temperature: f64,
    pub seed: u64,
}

/// Asks the provider to rewrite `targets` with `strategy`. The first target
/// is the primary parent: the child continues its lineage.
pub fn refine(
    targets: &[&Hypothesis],
    evidence: &[&EvidenceSet],
    strategy: Strategy,
    new_id: HypothesisId,
    ctx: &RefineContext<'_>,
    gateway: &Gateway,
) -> Result<RefinementAction, RefinementError> {
    check_arity(strategy, targets.len())?;
    let primary = targets[0];
    let text = if targets.len() == 1 {
        primary.text.clone()
    } else {
        targets
            .iter()
            .enumerate()
            .map(|(i, h)| format!("({}) {}", i + 1, h.text))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let snippets = format_snippets(evidence);
    let hint = strategy_hint(strategy);
    let bindings: BTreeMap<&str, &str> = [
        ("research_question", ctx.question),
        ("hypothesis", text.as_str()),
        ("evidence_snippets", snippets.as_str()),
        ("strategy_hint", hint.as_str()),
    ]
    .into_iter()
    .collect();
    let fail = |source| RefinementError::Provider {
        target: primary.id.clone(),
        source,
    };
    let prompt = gateway
        .templates()
        .render(template::REFINE, &bindings)
        .map_err(|e| fail(e.into()))?;
    let request = CompletionRequest::new(Purpose::Refine, prompt, ctx.temperature)
        .with_seed(derive_seed(ctx.seed, primary.id.as_str(), u64::from(ctx.round)))
        .with_tag("hypothesis", primary.text.as_str())
        .with_tag("strategy", strategy.letter().to_string());
    let reply = gateway.call_parsed(&request, parse_refinement_json).map_err(fail)?;

    let mut produced = Hypothesis::new(new_id, reply.hypothesis).map_err(|_| {
        fail(ProviderError::InvalidResponse("empty refined hypothesis".into()))
    })?;
    produced.lineage = primary.lineage.clone();
    produced
        .push_lineage(LineageStep {
            round: ctx.round,
            strategy,
            parents: targets.iter().map(|h| h.id.clone()).collect(),
        })
        .map_err(|e| fail(ProviderError::InvalidResponse(e.to_string())))?;
    let mismatch = reply.strategy != strategy;
    if mismatch {
        log::warn!(
            "refinement of {} asked for {:?} but the reply declared {:?}",
            primary.id,
            strategy,
            reply.strategy
        );
    }
    Ok(RefinementAction {
        round: ctx.round,
        strategy,
        targets: targets.iter().map(|h| h.id.clone()).collect(),
        produced,
        declared: reply.strategy,
        mismatch,
    })
}

/// The parent a hybrid replaces: highest binary entropy, ties to the smaller
/// id.
pub fn hybrid_replacement<T: Real>(
    targets: &[HypothesisId],
    beliefs: &BeliefDistribution<T>,
) -> Result<HypothesisId, RefinementError> {
    let mut best: Option<(T, &HypothesisId)> = None;
    for id in targets {
        let b = beliefs
            .get(id)
            .ok_or_else(|| RefinementError::UnknownTarget(id.clone()))?;
        let s = binary_entropy(b)?;
        let better = match best {
            None => true,
            Some((bs, bid)) => s > bs || (s == bs && id < bid),
        };
        if better {
            best = Some((s, id));
        }
    }
    Ok(best.expect("arity checked").1.clone())
}

/// Swaps refined hypotheses into the set. Deepening and Counterfactual
/// replace their target in its slot; a hybrid replaces one parent (see
/// [`hybrid_replacement`]) and leaves the others in place. The belief slot
/// moves to the successor, then `carry_over` decides its value.
pub fn apply_refinements<T: Real>(
    current: &[Hypothesis],
    beliefs: &BeliefDistribution<T>,
    actions: &[RefinementAction],
    carry_over: BeliefCarryOver,
    weights: &WeightConfig<T>,
) -> Result<(Vec<Hypothesis>, BeliefDistribution<T>), RefinementError> {
    let mut next = current.to_vec();
    let mut dist = beliefs.clone();
    let mut touched = HashSet::new();
    let mut successors = Vec::new();
    for action in actions {
        check_arity(action.strategy, action.targets.len())?;
        for t in &action.targets {
            if !current.iter().any(|h| &h.id == t) {
                return Err(RefinementError::UnknownTarget(t.clone()));
            }
            if !touched.insert(t.clone()) {
                return Err(RefinementError::DuplicateTarget(t.clone()));
            }
        }
        let replaced = match action.strategy {
            Strategy::Hybridization => hybrid_replacement(&action.targets, beliefs)?,
            _ => action.targets[0].clone(),
        };
        let slot = next
            .iter()
            .position(|h| h.id == replaced)
            .expect("target checked above");
        if !dist.rename(&replaced, action.produced.id.clone()) {
            return Err(RefinementError::DuplicateTarget(action.produced.id.clone()));
        }
        next[slot] = action.produced.clone();
        successors.push(action.produced.id.clone());
    }
    if carry_over == BeliefCarryOver::ResetToPrior && !successors.is_empty() {
        dist = reset_to_prior(&next, &dist, &successors, weights)?;
    }
    Ok((next, dist))
}

fn reset_to_prior<T: Real>(
    set: &[Hypothesis],
    dist: &BeliefDistribution<T>,
    successors: &[HypothesisId],
    weights: &WeightConfig<T>,
) -> Result<BeliefDistribution<T>, RefinementError> {
    let mut masses = Vec::with_capacity(set.len());
    for h in set {
        let s = h
            .scores
            .as_ref()
            .ok_or_else(|| RefinementError::MissingScores(h.id.clone()))?;
        let lit = |v: f64| T::lit(v);
        masses.push(lit(s.novelty) * weights.alpha + lit(s.relevance) * weights.beta + lit(s.feasibility) * weights.gamma);
    }
    let total = masses.iter().fold(T::zero(), |a, &m| a + m);
    if total <= T::zero() {
        return Err(BeliefError::AllZeroScores.into());
    }
    let is_new = |id: &HypothesisId| successors.contains(id);
    let fresh: T = dist
        .entries()
        .iter()
        .zip(&masses)
        .filter(|(e, _)| is_new(&e.id))
        .fold(T::zero(), |a, (_, &m)| a + m / total);
    let kept: T = dist
        .entries()
        .iter()
        .filter(|e| !is_new(&e.id))
        .fold(T::zero(), |a, e| a + e.belief);
    let scale = if kept > T::zero() { (T::one() - fresh) / kept } else { T::zero() };
    let out = dist
        .entries()
        .iter()
        .zip(&masses)
        .map(|(e, &m)| {
            let b = if is_new(&e.id) { m / total } else { e.belief * scale };
            (e.id.clone(), b)
        });
    Ok(BeliefDistribution::from_masses(out)?)
}
