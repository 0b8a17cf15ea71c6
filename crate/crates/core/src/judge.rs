//! Pairwise judging against the reference abstract and ELO bookkeeping.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypothesis::{Hypothesis, HypothesisId};
use crate::providers::parse::parse_verdict;
use crate::providers::{template, CompletionRequest, Gateway, ProviderError, Purpose};
use crate::scalar::Real;
use crate::seed::{derive_seed, rng_for, stable_hash};

/// Rating-table key of the reference abstract.
pub const REFERENCE: &str = "reference";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    AWins,
    BWins,
    Draw,
}

impl Outcome {
    /// Score of entity A: 1, 0 or one half.
    pub fn score_a<T: Real>(self) -> T {
        match self {
            Outcome::AWins => T::one(),
            Outcome::BWins => T::zero(),
            Outcome::Draw => T::lit(0.5),
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            Outcome::AWins => Outcome::BWins,
            Outcome::BWins => Outcome::AWins,
            Outcome::Draw => Outcome::Draw,
        }
    }
}

/// `1 / (1 + 10^((b - a) / 400))`.
pub fn expected_score<T: Real>(rating_a: T, rating_b: T) -> T {
    T::one() / (T::one() + T::lit(10.0).powf((rating_b - rating_a) / T::lit(400.0)))
}

/// Grid the shared rating change is rounded to. Ratings that start on the
/// grid stay on it, so every addition is exact and the rating total never
/// drifts. For `f64` the grid is 2^-30.
pub fn rating_quantum<T: Real>() -> T {
    T::epsilon() * T::lit(4_194_304.0)
}

/// ELO update with one shared change: A gains `K * (s_a - E_a)` and B loses
/// the same amount.
pub fn update_ratings<T: Real>(rating_a: T, rating_b: T, outcome: Outcome, k_factor: T) -> (T, T) {
    let raw = k_factor * (outcome.score_a::<T>() - expected_score(rating_a, rating_b));
    let q = rating_quantum::<T>();
    let delta = (raw / q).round() * q;
    (rating_a + delta, rating_b - delta)
}

#[derive(Debug, Error, PartialEq)]
pub enum JudgeError {
    #[error("no hypotheses to judge")]
    EmptyHypotheses,
    #[error("reference text is empty")]
    EmptyReference,
    #[error("judging {a} vs {b} failed: {source}")]
    Provider {
        a: String,
        b: String,
        #[source]
        source: ProviderError,
    },
}

/// Shared inputs of the judge prompt.
#[derive(Debug, Clone, Copy)]
pub struct JudgeContext<'a> {
    pub question: &'a str,
    pub keyword: &'a str,
    pub temperature: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVerdict {
    pub outcome: Outcome,
    /// Raw reply with A shown first, then with B shown first.
    pub verdicts: [String; 2],
}

fn ask(first: &str, second: &str, ctx: &JudgeContext<'_>, gateway: &Gateway) -> Result<(bool, String), ProviderError> {
    let bindings: BTreeMap<&str, &str> = [
        ("research_question", ctx.question),
        ("hypothesis_a", first),
        ("hypothesis_b", second),
        ("keyword_content", ctx.keyword),
    ]
    .into_iter()
    .collect();
    let prompt = gateway.templates().render(template::JUDGE, &bindings)?;
    // The seed depends on the presented pair only, so swapping the inputs
    // replays the same two calls.
    let seed = derive_seed(ctx.seed, "judge", stable_hash(&[first.as_bytes(), second.as_bytes()]));
    let request = CompletionRequest::new(Purpose::Judge, prompt, ctx.temperature)
        .with_seed(seed)
        .with_tag("hypothesis_a", first)
        .with_tag("hypothesis_b", second);
    gateway.call_parsed(&request, |text| parse_verdict(text).map(|v| (v, text.to_string())))
}

/// Judges `a` against `b` twice, once in each presentation order. A winner
/// needs both verdicts; a split is a draw.
pub fn judge_pair(a: &str, b: &str, ctx: &JudgeContext<'_>, gateway: &Gateway) -> Result<PairVerdict, ProviderError> {
    let (first_a, raw_ab) = ask(a, b, ctx, gateway)?;
    let (first_b, raw_ba) = ask(b, a, ctx, gateway)?;
    let a_wins_ab = first_a;
    let a_wins_ba = !first_b;
    let outcome = match (a_wins_ab, a_wins_ba) {
        (true, true) => Outcome::AWins,
        (false, false) => Outcome::BWins,
        _ => Outcome::Draw,
    };
    Ok(PairVerdict {
        outcome,
        verdicts: [raw_ab, raw_ba],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EloConfig {
    pub k_factor: f64,
    pub initial: f64,
    /// Games each hypothesis plays against the reference per round.
    pub games_per_round: usize,
    /// Also pair the current hypotheses with one another.
    pub hypothesis_vs_hypothesis: bool,
    pub temperature: f64,
}

impl Default for EloConfig {
    fn default() -> Self {
        Self {
            k_factor: 32.0,
            initial: 1200.0,
            games_per_round: 1,
            hypothesis_vs_hypothesis: false,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rating {
    pub elo: f64,
    pub games: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub round: u32,
    pub a: String,
    pub b: String,
    pub outcome: Outcome,
    pub verdicts: [String; 2],
    pub before: (f64, f64),
    pub after: (f64, f64),
}

/// Ratings table and match log, persisted across rounds of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tournament {
    pub config: EloConfig,
    pub ratings: BTreeMap<String, Rating>,
    pub matches: Vec<MatchRecord>,
}

impl Tournament {
    pub fn new(config: EloConfig) -> Self {
        Self {
            config,
            ratings: BTreeMap::new(),
            matches: Vec::new(),
        }
    }

    fn ensure(&mut self, id: &str) {
        let initial = self.config.initial;
        self.ratings.entry(id.to_string()).or_insert(Rating { elo: initial, games: 0 });
    }

    pub fn elo(&self, id: &str) -> Option<f64> {
        self.ratings.get(id).map(|r| r.elo)
    }

    /// Hands the parent's rating to its refined successor.
    pub fn inherit(&mut self, parent: &HypothesisId, child: &HypothesisId) {
        if let Some(r) = self.ratings.remove(parent.as_str()) {
            self.ratings.insert(child.to_string(), r);
        }
    }

    /// Drops every rating except the reference and `keep`.
    pub fn retain(&mut self, keep: &[HypothesisId]) {
        let keep: HashSet<&str> = keep.iter().map(HypothesisId::as_str).collect();
        self.ratings.retain(|k, _| k == REFERENCE || keep.contains(k.as_str()));
    }

    /// Mean hypothesis rating minus the reference rating, read from the
    /// table.
    pub fn elo_delta(&self, ids: &[HypothesisId]) -> f64 {
        let reference = self.elo(REFERENCE).unwrap_or(self.config.initial);
        if ids.is_empty() {
            return 0.0;
        }
        let sum: f64 = ids
            .iter()
            .map(|id| self.elo(id.as_str()).unwrap_or(self.config.initial))
            .sum();
        sum / ids.len() as f64 - reference
    }

    pub fn total_rating(&self) -> f64 {
        self.ratings.values().map(|r| r.elo).sum()
    }

    /// Applies a judged game serially and logs it.
    pub fn apply(&mut self, round: u32, a: &str, b: &str, verdict: PairVerdict) {
        self.ensure(a);
        self.ensure(b);
        let before = (self.ratings[a].elo, self.ratings[b].elo);
        let after = update_ratings(before.0, before.1, verdict.outcome, self.config.k_factor);
        for (id, elo) in [(a, after.0), (b, after.1)] {
            let r = self.ratings.get_mut(id).expect("ensured");
            r.elo = elo;
            r.games += 1;
        }
        self.matches.push(MatchRecord {
            round,
            a: a.to_string(),
            b: b.to_string(),
            outcome: verdict.outcome,
            verdicts: verdict.verdicts,
            before,
            after,
        });
    }

    /// Game list for one round, shuffled, with a random side for each game.
    pub fn schedule(&self, round: u32, ids: &[HypothesisId], seed: u64) -> Vec<(String, String)> {
        let mut games = Vec::new();
        for _ in 0..self.config.games_per_round {
            for id in ids {
                games.push((id.to_string(), REFERENCE.to_string()));
            }
            if self.config.hypothesis_vs_hypothesis {
                for (i, x) in ids.iter().enumerate() {
                    for y in &ids[i + 1..] {
                        games.push((x.to_string(), y.to_string()));
                    }
                }
            }
        }
        let mut rng = rng_for(seed, "schedule", u64::from(round));
        games.shuffle(&mut rng);
        games
            .into_iter()
            .map(|(x, y)| if rng.random::<bool>() { (y, x) } else { (x, y) })
            .collect()
    }

    /// Plays one round: every current hypothesis meets the reference (and,
    /// if enabled, each other). Games are judged concurrently, then applied
    /// in schedule order. Returns the round's ELO delta.
    pub fn play_round(
        &mut self,
        round: u32,
        hypotheses: &[Hypothesis],
        reference: &str,
        ctx: &JudgeContext<'_>,
        gateway: &Gateway,
    ) -> Result<f64, JudgeError> {
        if hypotheses.is_empty() {
            return Err(JudgeError::EmptyHypotheses);
        }
        if reference.trim().is_empty() {
            return Err(JudgeError::EmptyReference);
        }
        let ids: Vec<HypothesisId> = hypotheses.iter().map(|h| h.id.clone()).collect();
        self.ensure(REFERENCE);
        ids.iter().for_each(|id| self.ensure(id.as_str()));
        let text = |id: &str| -> &str {
            if id == REFERENCE {
                reference
            } else {
                &hypotheses.iter().find(|h| h.id.as_str() == id).expect("scheduled id").text
            }
        };
        let games = self.schedule(round, &ids, ctx.seed);
        let round_ctx = JudgeContext {
            seed: derive_seed(ctx.seed, "round", u64::from(round)),
            ..*ctx
        };
        let verdicts = gateway.fan_out(&games, |(a, b)| judge_pair(text(a), text(b), &round_ctx, gateway));
        for ((a, b), verdict) in games.iter().zip(verdicts) {
            let verdict = verdict.map_err(|source| JudgeError::Provider {
                a: a.clone(),
                b: b.clone(),
                source,
            })?;
            self.apply(round, a, b, verdict);
        }
        Ok(self.elo_delta(&ids))
    }
}
