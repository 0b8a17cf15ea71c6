use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    ChunkScore, HypothesisSnapshot, IterationRecord, LikelihoodRow, PipelineError, ProposalSummary,
    RefinementSummary, RunConfig, RunState, RunStatus,
};
use crate::belief::{
    binary_entropies, initial_beliefs, posterior_update, shannon_entropy, BeliefDistribution, BeliefError,
};
use crate::evidence::{assess_evidence, retrieve_topk, EvidenceSet, RetrievedChunk, ScoringContext, VectorStore};
use crate::hypothesis::{Hypothesis, HypothesisId, Strategy};
use crate::judge::{JudgeContext, Tournament};
use crate::proposal::{embed_batch, propose};
use crate::providers::{
    score_nrf, Embedder, Gateway, HttpEmbedder, HttpProvider, MockEmbedder, MockProvider, ProviderConfig,
    ProviderKind, TextProvider,
};
use crate::refinement::{
    apply_refinements, hybrid_replacement, plan_refinements, refine, select_for_refinement, RefineContext,
    RefinementAction,
};
use crate::seed::derive_seed;

/// Text provider named by `config`. A mock without its own seed uses
/// `default_seed`.
pub fn build_text_provider(config: &ProviderConfig, default_seed: u64) -> Result<Arc<dyn TextProvider>, PipelineError> {
    config.validate()?;
    Ok(match config.kind {
        ProviderKind::Mock => Arc::new(
            MockProvider::new(config.mock_seed.unwrap_or(default_seed)).with_dimension(config.mock_dimension),
        ),
        ProviderKind::Http => Arc::new(HttpProvider::from_config(config)?),
    })
}

/// Embedder named by `config`. The mock is seeded with `mock_seed` or 0, so
/// stores stay valid across run seeds.
pub fn build_embedder(config: &ProviderConfig) -> Result<Arc<dyn Embedder>, PipelineError> {
    config.validate()?;
    Ok(match config.kind {
        ProviderKind::Mock => Arc::new(MockEmbedder::new(config.mock_seed.unwrap_or(0), config.mock_dimension)),
        ProviderKind::Http => Arc::new(HttpEmbedder::from_config(config)?),
    })
}

/// Model access for one run.
pub struct Services {
    pub gateway: Gateway,
    pub embedder: Arc<dyn Embedder>,
}

impl Services {
    pub fn new(gateway: Gateway, embedder: Arc<dyn Embedder>) -> Self {
        Self { gateway, embedder }
    }

    pub fn from_config(config: &RunConfig) -> Result<Self, PipelineError> {
        let provider = build_text_provider(&config.provider, config.seed)?;
        let gateway = Gateway::new(provider, config.provider.retry_budget, config.provider.max_parallel);
        Ok(Self::new(gateway, build_embedder(&config.embedder)?))
    }

    pub fn with_transcript(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.gateway = self.gateway.with_transcript(sink);
        self
    }
}

/// Wall-clock cost of one round. Kept out of [`RunState`] so that state stays
/// reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTiming {
    pub round: u32,
    pub total_ms: u64,
    pub phases: BTreeMap<String, u64>,
}

struct Stopwatch {
    started: Instant,
    lap: Instant,
    phases: BTreeMap<String, u64>,
}

impl Stopwatch {
    fn new() -> Self {
        let now = Instant::now();
        Self {
            started: now,
            lap: now,
            phases: BTreeMap::new(),
        }
    }

    fn lap(&mut self, phase: &str) {
        let now = Instant::now();
        self.phases
            .insert(phase.to_string(), now.duration_since(self.lap).as_millis() as u64);
        self.lap = now;
    }

    fn finish(self, round: u32) -> RoundTiming {
        RoundTiming {
            round,
            total_ms: self.started.elapsed().as_millis() as u64,
            phases: self.phases,
        }
    }
}

/// Executes rounds against one store. Retrieval results are cached by
/// hypothesis text; the cache is a pure speedup and not part of the state.
pub struct Engine<'a> {
    services: &'a Services,
    store: &'a VectorStore,
    retrieval: HashMap<String, Vec<RetrievedChunk>>,
}

impl<'a> Engine<'a> {
    pub fn new(services: &'a Services, store: &'a VectorStore) -> Result<Self, PipelineError> {
        if store.is_empty() {
            return Err(PipelineError::EmptyStore);
        }
        let config = services.embedder.descriptor();
        if store.embedder != config {
            return Err(PipelineError::EmbedderMismatch {
                store: store.embedder.clone(),
                config,
            });
        }
        Ok(Self {
            services,
            store,
            retrieval: HashMap::new(),
        })
    }

    fn gateway(&self) -> &Gateway {
        &self.services.gateway
    }

    /// Runs the next round and commits it to `state`. On error the state is
    /// left exactly as it was.
    pub fn step(&mut self, state: &mut RunState) -> Result<RoundTiming, PipelineError> {
        if state.status != RunStatus::Running {
            return Err(PipelineError::Finished(state.status));
        }
        let round = state.next_round();
        if round == 0 {
            self.proposal_round(state)
        } else {
            self.validation_round(state, round)
        }
    }

    /// Steps until the run stops or `max_rounds` rounds ran in this call.
    /// `checkpoint` sees the state after every round and after a failure. A
    /// module error marks the run failed and is not returned; errors from
    /// `checkpoint` are.
    pub fn drive(
        &mut self,
        state: &mut RunState,
        max_rounds: Option<u32>,
        mut checkpoint: impl FnMut(&RunState, Option<&RoundTiming>) -> Result<(), PipelineError>,
    ) -> Result<(), PipelineError> {
        let mut done = 0;
        while state.status == RunStatus::Running && max_rounds.is_none_or(|m| done < m) {
            match self.step(state) {
                Ok(timing) => {
                    done += 1;
                    if let Some(r) = state.records.last() {
                        log::info!(
                            "round {}: entropy {:.4}, {} refined, {} ms, status {}",
                            r.round,
                            r.entropy,
                            r.refinements.len(),
                            timing.total_ms,
                            state.status.label()
                        );
                    }
                    checkpoint(state, Some(&timing))?;
                }
                Err(e) => {
                    log::error!("round {} failed: {e}", state.next_round());
                    state.status = RunStatus::Failed;
                    state.failure = Some(e.to_string());
                    checkpoint(state, None)?;
                }
            }
        }
        Ok(())
    }

    fn score_all(&self, hypotheses: &mut [Hypothesis], config: &RunConfig) -> Result<(), PipelineError> {
        let gateway = self.gateway();
        let scores = gateway.fan_out(hypotheses, |h| {
            score_nrf(&h.text, &config.question, &config.keyword, gateway, config.provider.temperature)
        });
        for (h, s) in hypotheses.iter_mut().zip(scores) {
            h.scores = Some(s?);
        }
        Ok(())
    }

    fn judge_context(config: &RunConfig) -> JudgeContext<'_> {
        JudgeContext {
            question: &config.question,
            keyword: &config.keyword,
            temperature: config.elo.temperature,
            seed: derive_seed(config.seed, "judge", 0),
        }
    }

    fn proposal_round(&mut self, state: &mut RunState) -> Result<RoundTiming, PipelineError> {
        let config = &state.config;
        let mut clock = Stopwatch::new();
        let mut ids = state.ids.clone();
        let outcome = propose(
            &config.question,
            config.n,
            &config.sampling,
            &config.kmeans(0),
            self.gateway(),
            &*self.services.embedder,
            derive_seed(config.seed, "proposal", 0),
            &mut ids,
        )?;
        clock.lap("proposal");
        let mut hypotheses = outcome.selected;
        self.score_all(&mut hypotheses, config)?;
        let beliefs = initial_beliefs(
            hypotheses
                .iter()
                .map(|h| (h.id.clone(), h.scores.expect("scored above"))),
            &config.weights,
        )?;
        clock.lap("scoring");
        let mut tournament = Tournament::new(config.elo.clone());
        let elo_delta = tournament.play_round(
            0,
            &hypotheses,
            &config.reference,
            &Self::judge_context(config),
            self.gateway(),
        )?;
        clock.lap("tournament");
        let proposal = ProposalSummary {
            candidates: outcome.candidates.len(),
            cluster_sizes: (0..outcome.assignment.k)
                .map(|c| outcome.assignment.members(c).count())
                .collect(),
            inertia: outcome.assignment.inertia,
        };
        let record = record(0, &hypotheses, &beliefs, &tournament, elo_delta, Some(proposal));
        state.records.push(record);
        state.hypotheses = hypotheses;
        state.beliefs = Some(beliefs);
        state.tournament = tournament;
        state.ids = ids;
        Ok(clock.finish(0))
    }

    fn retrieve(&mut self, config: &RunConfig, h: &Hypothesis) -> Result<Vec<RetrievedChunk>, PipelineError> {
        if let Some(hit) = self.retrieval.get(&h.text) {
            return Ok(hit.clone());
        }
        let chunks = retrieve_topk(self.store, &config.question, h, config.k, &*self.services.embedder)?;
        self.retrieval.insert(h.text.clone(), chunks.clone());
        Ok(chunks)
    }

    fn validation_round(&mut self, state: &mut RunState, round: u32) -> Result<RoundTiming, PipelineError> {
        let config = state.config.clone();
        let mut clock = Stopwatch::new();
        let hypotheses = state.hypotheses.clone();
        let prior = state
            .beliefs
            .clone()
            .ok_or_else(|| PipelineError::CorruptCheckpoint("no beliefs after round 0".into()))?;

        let mut jobs = Vec::with_capacity(hypotheses.len());
        for h in &hypotheses {
            jobs.push((h, self.retrieve(&config, h)?));
        }
        clock.lap("retrieval");

        let ctx = ScoringContext {
            question: &config.question,
            keyword: &config.keyword,
            temperature: config.provider.temperature,
            seed: derive_seed(config.seed, "evidence", u64::from(round)),
            round,
        };
        let gateway = self.gateway();
        let evidence: Vec<EvidenceSet> = gateway
            .fan_out(&jobs, |(h, chunks)| assess_evidence(&h.id, &h.text, chunks.clone(), &ctx, gateway))
            .into_iter()
            .collect::<Result<_, _>>()?;
        let likelihoods: Vec<f64> = evidence
            .iter()
            .map(|e| e.likelihood_or(config.evidence_floor))
            .collect();
        let (beliefs, degenerate) = match posterior_update(&prior, &likelihoods) {
            Ok(b) => (b, false),
            Err(BeliefError::DegenerateEvidence) => {
                log::warn!("round {round}: evidence zeroed every hypothesis, keeping the prior");
                (prior.clone(), true)
            }
            Err(e) => return Err(e.into()),
        };
        clock.lap("evidence");

        let mut tournament = state.tournament.clone();
        let elo_delta = tournament.play_round(
            round,
            &hypotheses,
            &config.reference,
            &Self::judge_context(&config),
            gateway,
        )?;
        clock.lap("tournament");

        let mut record = record(round, &hypotheses, &beliefs, &tournament, elo_delta, None);
        record.degenerate = degenerate;
        record.likelihoods = likelihood_rows(&evidence, &likelihoods);

        let previous = state.records.last().expect("round 0 recorded").entropy;
        let status = if round >= 2 && (record.entropy - previous).abs() < config.epsilon_h {
            RunStatus::ConvergedEntropy
        } else if round >= config.t_max {
            RunStatus::MaxIterations
        } else {
            RunStatus::Running
        };

        let mut ids = state.ids.clone();
        let (next, next_beliefs) = if status == RunStatus::Running {
            let selected = select_for_refinement(&beliefs, config.tau_s);
            let by_id: HashMap<HypothesisId, f64> = hypotheses
                .iter()
                .map(|h| h.id.clone())
                .zip(likelihoods.iter().copied())
                .collect();
            let plans = plan_refinements(&selected, &hypotheses, &by_id, &config.refinement)?;
            let planned: Vec<_> = plans.into_iter().map(|p| (p, ids.allocate())).collect();
            let rctx = RefineContext {
                question: &config.question,
                round,
                temperature: config.refinement.temperature,
                seed: derive_seed(config.seed, "refine", u64::from(round)),
            };
            let find = |id: &HypothesisId| hypotheses.iter().position(|h| &h.id == id).expect("planned id");
            let mut actions: Vec<RefinementAction> = gateway
                .fan_out(&planned, |(plan, new_id)| {
                    let slots: Vec<usize> = plan.targets.iter().map(find).collect();
                    let targets: Vec<&Hypothesis> = slots.iter().map(|&i| &hypotheses[i]).collect();
                    let sets: Vec<&EvidenceSet> = slots.iter().map(|&i| &evidence[i]).collect();
                    refine(&targets, &sets, plan.strategy, new_id.clone(), &rctx, gateway)
                })
                .into_iter()
                .collect::<Result<_, _>>()?;
            if !actions.is_empty() {
                let texts: Vec<String> = actions.iter().map(|a| a.produced.text.clone()).collect();
                let vectors = embed_batch(&texts, &*self.services.embedder)?;
                let mut produced: Vec<Hypothesis> = actions.iter().map(|a| a.produced.clone()).collect();
                self.score_all(&mut produced, &config)?;
                for ((a, p), v) in actions.iter_mut().zip(produced).zip(vectors) {
                    a.produced = p;
                    a.produced.embedding = Some(v);
                }
            }
            for a in &actions {
                let replaced = match a.strategy {
                    Strategy::Hybridization => hybrid_replacement(&a.targets, &beliefs)?,
                    _ => a.targets[0].clone(),
                };
                tournament.inherit(&replaced, &a.produced.id);
                record.refinements.push(RefinementSummary {
                    strategy: a.strategy,
                    targets: a.targets.clone(),
                    replaced,
                    produced: HypothesisSnapshot::from(&a.produced),
                    declared: a.declared,
                    mismatch: a.mismatch,
                });
            }
            record.selected = selected;
            clock.lap("refinement");
            apply_refinements(
                &hypotheses,
                &beliefs,
                &actions,
                config.refinement.carry_over,
                &config.weights,
            )?
        } else {
            (hypotheses, beliefs)
        };

        state.records.push(record);
        state.hypotheses = next;
        state.beliefs = Some(next_beliefs);
        state.tournament = tournament;
        state.ids = ids;
        state.status = status;
        Ok(clock.finish(round))
    }
}

fn record(
    round: u32,
    hypotheses: &[Hypothesis],
    beliefs: &BeliefDistribution<f64>,
    tournament: &Tournament,
    elo_delta: f64,
    proposal: Option<ProposalSummary>,
) -> IterationRecord {
    IterationRecord {
        round,
        hypotheses: hypotheses.iter().map(HypothesisSnapshot::from).collect(),
        beliefs: beliefs.clone(),
        entropy: shannon_entropy(beliefs),
        binary_entropies: binary_entropies(beliefs),
        likelihoods: Vec::new(),
        degenerate: false,
        selected: Vec::new(),
        refinements: Vec::new(),
        ratings: tournament
            .ratings
            .iter()
            .map(|(id, r)| (id.clone(), r.elo))
            .collect(),
        elo_delta,
        proposal,
    }
}

fn likelihood_rows(evidence: &[EvidenceSet], likelihoods: &[f64]) -> Vec<LikelihoodRow> {
    evidence
        .iter()
        .zip(likelihoods)
        .map(|(e, &likelihood)| LikelihoodRow {
            id: e.hypothesis.clone(),
            likelihood,
            floor_applied: e.likelihood().is_none(),
            chunks: e
                .chunks
                .iter()
                .zip(&e.records)
                .map(|(c, r)| ChunkScore {
                    chunk_id: c.chunk_id.clone(),
                    similarity: c.similarity,
                    base: r.base,
                    method_match: r.method_match,
                    contribution: r.contribution,
                })
                .collect(),
        })
        .collect()
}

/// Runs a fresh configuration to completion without persistence.
pub fn run(config: RunConfig, services: &Services, store: &VectorStore) -> Result<RunState, PipelineError> {
    let mut state = RunState::new(config)?;
    let mut engine = Engine::new(services, store)?;
    engine.drive(&mut state, None, |_, _| Ok(()))?;
    Ok(state)
}
