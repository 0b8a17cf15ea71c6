//! Acceptance criteria 1 to 9, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines reach stdout under a plain
//! `cargo test`. The process fails when any criterion fails, except the
//! checks listed in `KNOWN_FAILURES`, which print FAIL but are expected.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use hypoloop::belief::{binary_entropy, posterior_update, shannon_entropy, BeliefDistribution};
use hypoloop::evidence::{query_text, retrieve_topk, ChunkingConfig, EvidenceChunk, Span, VectorStore};
use hypoloop::hypothesis::{Hypothesis, HypothesisId};
use hypoloop::judge::{update_ratings, EloConfig, JudgeContext, Outcome, Tournament, REFERENCE};
use hypoloop::pipeline::{demo, execute, Engine, RunDir, RunState, RunStatus, Services};
use hypoloop::proposal::{kmeans_cluster_traced, select_representatives, KMeansParams};
use hypoloop::providers::parse::{parse_refinement_json, parse_tagged_binary, parse_tagged_scalar, ScalarRange};
use hypoloop::providers::{CompletionRequest, Embedder, Gateway, MockEmbedder, MockProvider, Purpose, Responder};
use hypoloop::seed::stable_hash;

mod common;
use common::{scripted_config, scripted_services, WORDS};

/// Criteria expected to fail, with the reason printed beside them.
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    2,
    "binary_entropy(0.437) is 0.98851739 at 50 digits; the stated 0.98858 +/- 1e-5 excludes it",
)];

struct Verdict {
    ok: bool,
    detail: String,
}

impl Verdict {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Self {
            ok,
            detail: detail.into(),
        }
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

fn ids(n: usize) -> Vec<HypothesisId> {
    (0..n).map(|i| HypothesisId::sequential(i as u64)).collect()
}

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.001..1.0)).collect();
    let t: f64 = w.iter().sum();
    w.iter().map(|x| x / t).collect()
}

fn criterion_1() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_single, mut worst_chain) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(2..=10);
        let prior = random_distribution(&mut rng, n);
        let l1: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let l2: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
        let dist = BeliefDistribution::from_entries(ids(n).into_iter().zip(prior.iter().copied())).unwrap();

        let post = posterior_update(&dist, &l1).unwrap().beliefs();
        let z: f64 = prior.iter().zip(&l1).map(|(p, l)| p * l).sum();
        for (i, b) in post.iter().enumerate() {
            worst_single = worst_single.max((b - prior[i] * l1[i] / z).abs());
        }

        let chained = posterior_update(&posterior_update(&dist, &l1).unwrap(), &l2).unwrap();
        let product: Vec<f64> = l1.iter().zip(&l2).map(|(a, b)| a * b).collect();
        let once = posterior_update(&dist, &product).unwrap();
        for (a, b) in chained.beliefs().iter().zip(once.beliefs()) {
            worst_chain = worst_chain.max((a - b).abs());
        }
    }
    let elapsed = started.elapsed();
    Verdict::new(
        worst_single <= 1e-12 && worst_chain <= 1e-9 && within(elapsed, 5),
        format!("max single-step error {worst_single:.1e}, max chain error {worst_chain:.1e}, {elapsed:.2?}"),
    )
}

#[derive(Deserialize)]
struct EntropyReference {
    shannon: Vec<ShannonCase>,
    binary: Vec<BinaryCase>,
}

#[derive(Deserialize)]
struct ShannonCase {
    p: Vec<f64>,
    h: String,
}

#[derive(Deserialize)]
struct BinaryCase {
    b: f64,
    s: String,
}

fn criterion_2() -> Verdict {
    let reference: EntropyReference =
        serde_json::from_str(include_str!("data/entropy_reference.json")).expect("reference fixture parses");
    let mut worst = 0.0f64;
    for case in &reference.shannon {
        let dist = BeliefDistribution::from_entries(ids(case.p.len()).into_iter().zip(case.p.iter().copied())).unwrap();
        let want: f64 = case.h.parse().unwrap();
        worst = worst.max((shannon_entropy(&dist) - want).abs());
    }
    for case in &reference.binary {
        let want: f64 = case.s.parse().unwrap();
        worst = worst.max((binary_entropy(case.b).unwrap() - want).abs());
    }
    let exact = |p: Vec<f64>| shannon_entropy(&BeliefDistribution::from_entries(ids(p.len()).into_iter().zip(p)).unwrap());
    let endpoints = binary_entropy(0.0f64) == Ok(0.0)
        && binary_entropy(1.0f64) == Ok(0.0)
        && binary_entropy(0.5f64) == Ok(1.0)
        && exact(vec![1.0, 0.0, 0.0]) == 0.0
        && exact(vec![0.5, 0.5, 0.0]) == 1.0;
    let case = binary_entropy(0.437f64).unwrap();
    let case_ok = (case - 0.98858).abs() <= 1e-5;
    Verdict::new(
        worst <= 1e-12 && endpoints && case_ok,
        format!(
            "{} cases max error {worst:.1e}, endpoints {}, binary_entropy(0.437) = {case:.10} vs 0.98858 +/- 1e-5 {}",
            reference.shannon.len() + reference.binary.len(),
            if endpoints { "exact" } else { "WRONG" },
            if case_ok { "ok" } else { "outside" }
        ),
    )
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn criterion_3() -> Verdict {
    let started = Instant::now();
    let dim = 24;
    let embedder = MockEmbedder::new(5, dim);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    let mut queries = 0;
    for s in 0..200 {
        let size = rng.random_range(1..=1000);
        let mut store = VectorStore::new(dim, embedder.descriptor(), ChunkingConfig::default());
        for i in 0..size {
            let span = Span { start: i, end: i + 1 };
            store
                .insert(EvidenceChunk {
                    id: EvidenceChunk::chunk_id(&format!("doc{s}"), span),
                    doc_id: format!("doc{s}"),
                    span,
                    text: format!("chunk {i}"),
                    vector: unit_vector(&mut rng, dim),
                })
                .unwrap();
        }
        let h = Hypothesis::new(HypothesisId::new("h"), format!("hypothesis number {s}")).unwrap();
        let q = embedder.embed(&[query_text(&h.text, "question")]).unwrap().remove(0);
        let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut brute: Vec<(f64, &str)> = store
            .chunks
            .iter()
            .map(|c| {
                let dot: f64 = c.vector.iter().zip(&q).map(|(a, b)| a * b).sum();
                let cn = c.vector.iter().map(|x| x * x).sum::<f64>().sqrt();
                (dot / (cn * qn), c.id.as_str())
            })
            .collect();
        brute.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(b.1)));
        for k in [1, 5, 20] {
            queries += 1;
            let got: Vec<String> = retrieve_topk(&store, "question", &h, k, &embedder)
                .unwrap()
                .into_iter()
                .map(|c| c.chunk_id)
                .collect();
            let want: Vec<&str> = brute.iter().take(k).map(|x| x.1).collect();
            if got != want {
                mismatches += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    Verdict::new(
        mismatches == 0 && within(elapsed, 30),
        format!("{queries} queries over 200 stores, {mismatches} mismatches, {elapsed:.2?}"),
    )
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut recovered, mut monotone) = (0, true);
    let datasets = 50;
    for d in 0..datasets {
        let k = rng.random_range(2..=6);
        let dim = rng.random_range(2..=8);
        let spread = 1.0;
        let mut centers: Vec<Vec<f64>> = Vec::new();
        while centers.len() < k {
            let c: Vec<f64> = (0..dim).map(|_| rng.random_range(-40.0..40.0)).collect();
            let far = centers.iter().all(|o| {
                let d2: f64 = o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                d2.sqrt() >= 5.0 * (2.0 * spread)
            });
            if far {
                centers.push(c);
            }
        }
        let mut points = Vec::new();
        let mut planted = Vec::new();
        for (label, c) in centers.iter().enumerate() {
            for _ in 0..rng.random_range(5..=30) {
                let offset = unit_vector(&mut rng, dim);
                let r = spread * rng.random_range(0.0..1.0f64);
                points.push(c.iter().zip(&offset).map(|(x, o)| x + r * o).collect::<Vec<f64>>());
                planted.push(label);
            }
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.shuffle(&mut rng);
        let points: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();
        let planted: Vec<usize> = order.iter().map(|&i| planted[i]).collect();

        let params = KMeansParams {
            k,
            seed: d as u64,
            ..KMeansParams::default()
        };
        let (assignment, traces) = kmeans_cluster_traced(&points, &params).unwrap();
        monotone &= traces.iter().all(|t| t.windows(2).all(|w| w[1] <= w[0]));
        let reps = select_representatives(&points, &assignment).unwrap();
        let mut labels: Vec<usize> = reps.iter().map(|&i| planted[i]).collect();
        labels.sort_unstable();
        if labels == (0..k).collect::<Vec<_>>() {
            recovered += 1;
        }
    }
    let rate = recovered as f64 / datasets as f64;
    Verdict::new(
        rate >= 0.95 && monotone,
        format!(
            "{recovered}/{datasets} datasets recovered ({:.0}%), inertia {}",
            rate * 100.0,
            if monotone { "non-increasing in every run" } else { "ROSE in some run" }
        ),
    )
}

fn criterion_5() -> Verdict {
    let started = Instant::now();
    let texts: Vec<String> = (0..5)
        .map(|i| {
            let tag = if i == 0 { "PLANTED mechanism" } else { "Candidate mechanism" };
            format!("{tag} {} improves factual recall through {}", WORDS[i], WORDS[i + 5])
        })
        .collect();
    let config = scripted_config(5, 8, 0.3, 1e-6);
    let services = scripted_services(texts, |h, _| if h.contains("PLANTED") { 0.9 } else { 0.2 }, false);
    let store = demo::build_store(&config).unwrap();
    let state = hypoloop::pipeline::run(config, &services, &store).unwrap();
    let elapsed = started.elapsed();
    if state.status == RunStatus::Failed {
        return Verdict::new(false, format!("run failed: {:?}", state.failure));
    }

    let first = &state.records[0];
    let planted = first
        .hypotheses
        .iter()
        .position(|h| h.text.contains("PLANTED"))
        .expect("planted hypothesis selected");
    let b0 = first.beliefs.beliefs();
    let l: Vec<f64> = (0..5).map(|i| if i == planted { 0.9 } else { 0.2 }).collect();
    let mut worst = 0.0f64;
    for r in &state.records {
        let k = r.round as i32;
        let mass: Vec<f64> = b0.iter().zip(&l).map(|(b, l)| b * l.powi(k)).collect();
        let z: f64 = mass.iter().sum();
        for (got, m) in r.beliefs.beliefs().iter().zip(&mass) {
            worst = worst.max((got - m / z).abs());
        }
    }
    let last = state.records.last().unwrap();
    let final_belief = last.beliefs.beliefs()[planted];
    let delta_h = last.entropy - first.entropy;
    let ok = final_belief > 0.9
        && delta_h < -1.0
        && state.status == RunStatus::MaxIterations
        && state.records.len() == 9
        && worst <= 1e-9
        && within(elapsed, 10);
    Verdict::new(
        ok,
        format!(
            "final planted belief {final_belief:.6}, H_T - H_0 = {delta_h:.3} bits, status {}, recurrence error {worst:.1e}, {elapsed:.2?}",
            state.status.label()
        ),
    )
}

fn elo_replay(rounds: u32) -> Result<(), String> {
    // Fixed preference order; the judge is consistent under order swaps.
    let rank = |text: &str| -> i32 {
        match text {
            "first hypothesis" => 2,
            "reference abstract" => 1,
            _ => 0,
        }
    };
    let responder: Responder = Arc::new(move |req: &CompletionRequest| {
        (req.purpose == Purpose::Judge).then(|| {
            let a = rank(req.tag("hypothesis_a").unwrap_or_default());
            let b = rank(req.tag("hypothesis_b").unwrap_or_default());
            format!("<winner>{}</winner>", if a >= b { "A" } else { "B" })
        })
    });
    let gateway = Gateway::new(Arc::new(MockProvider::new(0).with_responder(responder)), 0, 4);
    let hyps = vec![
        Hypothesis::new(HypothesisId::new("h1"), "first hypothesis").unwrap(),
        Hypothesis::new(HypothesisId::new("h2"), "second hypothesis").unwrap(),
    ];
    let ctx = JudgeContext {
        question: "q",
        keyword: "k",
        temperature: 0.0,
        seed: 99,
    };
    let mut t = Tournament::new(EloConfig::default());
    for r in 0..rounds {
        t.play_round(r, &hyps, "reference abstract", &ctx, &gateway).map_err(|e| e.to_string())?;
    }

    let text = |id: &str| match id {
        "h1" => "first hypothesis",
        "h2" => "second hypothesis",
        _ => "reference abstract",
    };
    let quantum = f64::EPSILON * (1u64 << 22) as f64;
    let mut table: BTreeMap<&str, f64> = [("h1", 1200.0), ("h2", 1200.0), (REFERENCE, 1200.0)].into();
    for m in &t.matches {
        let (ra, rb) = (table[m.a.as_str()], table[m.b.as_str()]);
        let (qa, qb) = (rank(text(&m.a)), rank(text(&m.b)));
        let score = if qa > qb { 1.0 } else { 0.0 };
        let expected = 1.0 / (1.0 + 10f64.powf((rb - ra) / 400.0));
        let delta = (32.0 * (score - expected) / quantum).round() * quantum;
        let after = (ra + delta, rb - delta);
        if (m.before, m.after) != ((ra, rb), after) {
            return Err(format!("round {} game {} v {}: {:?} vs hand {:?}", m.round, m.a, m.b, m.after, after));
        }
        table.insert(m.a.as_str(), after.0);
        table.insert(m.b.as_str(), after.1);
    }
    for (id, elo) in &table {
        if t.elo(id) != Some(*elo) {
            return Err(format!("final rating of {id} differs"));
        }
    }
    Ok(())
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut t = Tournament::new(EloConfig::default());
    let players: Vec<String> = (0..8).map(|i| format!("p{i}")).collect();
    for p in &players {
        t.ratings.insert(p.clone(), hypoloop::judge::Rating { elo: 1200.0, games: 0 });
    }
    let start_total = t.total_rating();
    let mut conserved = true;
    for i in 0..10_000 {
        let a = rng.random_range(0..8);
        let b = (a + rng.random_range(1..8)) % 8;
        let outcome = [Outcome::AWins, Outcome::BWins, Outcome::Draw][rng.random_range(0..3)];
        let verdict = hypoloop::judge::PairVerdict {
            outcome,
            verdicts: [String::new(), String::new()],
        };
        t.apply(i, &players[a], &players[b], verdict);
        conserved &= t.total_rating() == start_total;
    }
    let pair = update_ratings(1200.0f64, 1200.0, Outcome::AWins, 32.0);
    let pair_ok = pair == (1216.0, 1184.0);
    let replay = elo_replay(4);

    let draw: Responder = Arc::new(|req: &CompletionRequest| {
        (req.purpose == Purpose::Judge).then(|| "<winner>A</winner>".to_string())
    });
    let gateway = Gateway::new(Arc::new(MockProvider::new(0).with_responder(draw)), 0, 4);
    let hyps: Vec<Hypothesis> = (0..4)
        .map(|i| Hypothesis::new(HypothesisId::sequential(i), format!("text {i}")).unwrap())
        .collect();
    let ctx = JudgeContext {
        question: "q",
        keyword: "k",
        temperature: 0.0,
        seed: 1,
    };
    let mut dt = Tournament::new(EloConfig {
        hypothesis_vs_hypothesis: true,
        ..EloConfig::default()
    });
    let draws_zero = (0..5).all(|r| dt.play_round(r, &hyps, "reference", &ctx, &gateway).unwrap() == 0.0);

    Verdict::new(
        conserved && pair_ok && replay.is_ok() && draws_zero,
        format!(
            "sum conserved exactly over 10000 games: {conserved}, (1200,1200,win,32) -> {pair:?}, scripted replay: {}, always-draw delta zero: {draws_zero}",
            replay.err().unwrap_or_else(|| "exact".into())
        ),
    )
}

fn criterion_7() -> Verdict {
    let unit = ScalarRange::UNIT;
    let accepted: Vec<(&str, bool)> = vec![
        ("<novelty>0.8</novelty>", parse_tagged_scalar("<novelty>0.8</novelty>", "novelty", unit, true) == Ok(0.8)),
        (
            "<novelty> 0.8 </novelty> wrapped in prose",
            parse_tagged_scalar("The idea is fresh.\n<novelty>\n 0.8 \n</novelty>\nOverall good.", "novelty", unit, true)
                == Ok(0.8),
        ),
        ("<base_LH>0.35</base_LH>", parse_tagged_scalar("Reasoning... <base_LH>0.35</base_LH>", "base_LH", unit, true) == Ok(0.35)),
        ("<match>1</match>", parse_tagged_binary("<match>1</match>", "match") == Ok(true)),
        ("<match> 0 </match> in prose", parse_tagged_binary("Methods differ. <match> 0 </match>", "match") == Ok(false)),
        (
            "refinement JSON",
            parse_refinement_json(r#"{"optimized hypothesis": "X causes Y", "strategy": "B"}"#)
                .is_ok_and(|r| r.hypothesis == "X causes Y" && r.strategy == hypoloop::Strategy::Counterfactual),
        ),
        (
            "refinement JSON wrapped in prose and a fence",
            parse_refinement_json("Here you go:\n```json\n{ \"optimized hypothesis\": \"X {with braces}\", \"strategy\": \" C \" }\n```\nDone.")
                .is_ok_and(|r| r.hypothesis == "X {with braces}" && r.strategy == hypoloop::Strategy::Hybridization),
        ),
    ];
    let rejected: Vec<(&str, bool)> = vec![
        ("missing tag", parse_tagged_scalar("novelty is 0.8", "novelty", unit, true).is_err()),
        ("unclosed tag", parse_tagged_scalar("<novelty>0.8", "novelty", unit, true).is_err()),
        ("empty tag", parse_tagged_scalar("<novelty></novelty>", "novelty", unit, true).is_err()),
        ("blank tag", parse_tagged_scalar("<base_LH>   </base_LH>", "base_LH", unit, true).is_err()),
        ("non-numeric", parse_tagged_scalar("<base_LH>high</base_LH>", "base_LH", unit, true).is_err()),
        ("non-binary match", parse_tagged_binary("<match>0.5</match>", "match").is_err()),
        ("non-numeric match", parse_tagged_binary("<match>yes</match>", "match").is_err()),
        ("missing hypothesis key", parse_refinement_json(r#"{"strategy": "A"}"#).is_err()),
        ("missing strategy key", parse_refinement_json(r#"{"optimized hypothesis": "x"}"#).is_err()),
        ("invalid strategy letter", parse_refinement_json(r#"{"optimized hypothesis": "x", "strategy": "D"}"#).is_err()),
        ("unbalanced braces", parse_refinement_json(r#"{"optimized hypothesis": "x", "strategy": "A""#).is_err()),
        ("empty hypothesis", parse_refinement_json(r#"{"optimized hypothesis": "  ", "strategy": "A"}"#).is_err()),
    ];
    let bad: Vec<&str> = accepted
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| *n)
        .chain(rejected.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n))
        .collect();
    Verdict::new(
        bad.is_empty(),
        format!(
            "{} well-formed accepted, {} malformed rejected{}",
            accepted.iter().filter(|x| x.1).count(),
            rejected.iter().filter(|x| x.1).count(),
            if bad.is_empty() { String::new() } else { format!(", wrong: {bad:?}") }
        ),
    )
}

fn criterion_8() -> Verdict {
    let a = demo::run_demo(7, None).unwrap().to_json();
    let b = demo::run_demo(7, None).unwrap().to_json();
    let repeat = a == b;

    let tmp = tempfile::tempdir().unwrap();
    let config = demo::config(7);
    let store = demo::build_store(&config).unwrap();
    let whole_dir = RunDir::create(&tmp.path().join("whole"), &config).unwrap();
    let whole = execute(
        &whole_dir,
        RunState::new(config.clone()).unwrap(),
        &Services::from_config(&config).unwrap(),
        &store,
        None,
    )
    .unwrap();

    let split_dir = RunDir::create(&tmp.path().join("split"), &config).unwrap();
    let partial = execute(
        &split_dir,
        RunState::new(config.clone()).unwrap(),
        &Services::from_config(&config).unwrap(),
        &store,
        Some(3),
    )
    .unwrap();
    let resumed_from = split_dir.load_state().unwrap();
    let midway = partial.status == RunStatus::Running && resumed_from == partial;
    let resumed = execute(
        &split_dir,
        resumed_from,
        &Services::from_config(&config).unwrap(),
        &store,
        None,
    )
    .unwrap();
    let files_equal = ["state.json", "records.jsonl", "matches.jsonl", "report.txt"].iter().all(|f| {
        std::fs::read(whole_dir.path(f)).unwrap() == std::fs::read(split_dir.path(f)).unwrap()
    });
    let same = resumed.to_json() == whole.to_json() && whole.to_json() == a && files_equal;
    Verdict::new(
        repeat && midway && same,
        format!(
            "demo --seed 7 twice identical: {repeat}, stopped after 3 rounds then resumed: {midway}, resumed equals uninterrupted byte for byte: {same} ({} bytes)",
            a.len()
        ),
    )
}

/// Category of a planted hypothesis from its text.
fn category(text: &str) -> Option<&'static str> {
    ["AMB", "CONF"].into_iter().find(|c| text.contains(&format!("{c}-")))
}

fn noisy_oracle(text: &str, round: u32) -> f64 {
    let marker = text.split_whitespace().find(|w| category(w).is_some()).unwrap_or("none");
    let u = (stable_hash(&[marker.as_bytes(), &round.to_le_bytes()]) % 1_000_000) as f64 / 1e6;
    match category(marker) {
        Some("AMB") => 0.5 + 0.3 * (u - 0.5) * 2.0,
        _ => 0.2 + 0.04 * (u - 0.5),
    }
}

fn criterion_9() -> Verdict {
    let started = Instant::now();
    let mut counts: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut identical_beliefs = true;
    for seed in 0..6u64 {
        let texts: Vec<String> = ["AMB-1", "AMB-2", "CONF-1", "CONF-2"]
            .iter()
            .enumerate()
            .map(|(i, m)| format!("{m}{seed} mechanism {} shapes retention via {}", WORDS[i], WORDS[i + 4]))
            .collect();
        let mut trajectories: Vec<Vec<Vec<f64>>> = Vec::new();
        for tau in ["0.3", "0.5", "0.7"] {
            let mut config = scripted_config(4, 6, tau.parse().unwrap(), 1e-12);
            config.refinement.cap = Some(4);
            let services = scripted_services(texts.clone(), noisy_oracle, true);
            let store = demo::build_store(&config).unwrap();
            let mut state = RunState::new(config).unwrap();
            let mut engine = Engine::new(&services, &store).unwrap();
            engine.drive(&mut state, None, |_, _| Ok(())).unwrap();
            if state.status == RunStatus::Failed {
                return Verdict::new(false, format!("run failed: {:?}", state.failure));
            }
            let entry = counts.entry(tau.to_string()).or_default();
            for r in &state.records {
                let text_of: HashMap<&HypothesisId, &str> =
                    r.hypotheses.iter().map(|h| (&h.id, h.text.as_str())).collect();
                for a in &r.refinements {
                    match category(text_of[&a.targets[0]]) {
                        Some("AMB") => entry.0 += 1,
                        Some("CONF") => entry.1 += 1,
                        _ => {}
                    }
                }
            }
            trajectories.push(state.records.iter().map(|r| r.beliefs.beliefs()).collect());
        }
        identical_beliefs &= trajectories.windows(2).all(|w| w[0] == w[1]);
    }
    let (amb3, conf3) = counts["0.3"];
    let (amb5, conf5) = counts["0.5"];
    let (amb7, conf7) = counts["0.7"];
    let elapsed = started.elapsed();
    Verdict::new(
        amb5 > amb7 && conf5 < conf3 && identical_beliefs,
        format!(
            "ambiguous refined 0.3/0.5/0.7 = {amb3}/{amb5}/{amb7}, confident refined = {conf3}/{conf5}/{conf7}, beliefs identical across thresholds: {identical_beliefs}, {elapsed:.2?}"
        ),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Verdict); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut unexpected = Vec::new();
    for (n, check) in criteria {
        let v = check();
        let known = KNOWN_FAILURES.iter().find(|(k, _)| *k == n);
        println!("criterion {n}: {} : {}", if v.ok { "PASS" } else { "FAIL" }, v.detail);
        match (v.ok, known) {
            (false, Some((_, why))) => println!("criterion {n}: known failure: {why}"),
            (false, None) => unexpected.push(format!("criterion {n} failed")),
            (true, Some(_)) => unexpected.push(format!("criterion {n} passed but is listed as a known failure")),
            (true, None) => {}
        }
    }
    if !unexpected.is_empty() {
        eprintln!("{}", unexpected.join("\n"));
        std::process::exit(1);
    }
}
