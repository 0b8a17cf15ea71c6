//! Prompt templates and the registry that renders them.
//!
//! Placeholders are written `{{slot_name}}`. Single braces are literal text,
//! which keeps the answer-format lines (`<novelty>{your novelty rating}</novelty>`)
//! intact. Rendering is a single pass: slot values are inserted verbatim and
//! never re-scanned.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GENERATE: &str = "hypothesis_generation";
pub const NOVELTY: &str = "novelty_evaluation";
pub const RELEVANCE: &str = "relevance_evaluation";
pub const FEASIBILITY: &str = "feasibility_evaluation";
pub const BASE_LIKELIHOOD: &str = "base_likelihood";
pub const METHOD_MATCH: &str = "method_match";
pub const REFINE: &str = "refinement";
pub const JUDGE: &str = "pairwise_judge";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TemplateError {
    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}` needs slot `{slot}`")]
    MissingSlot { template: String, slot: String },
    #[error("template `{template}` declares slots {declared:?} but its body uses {used:?}")]
    SlotListMismatch {
        template: String,
        declared: Vec<String>,
        used: Vec<String>,
    },
}

/// How much of a template's wording comes from the method description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Published prompt text, shipped unchanged.
    Published,
    /// Published prompt with an appended directive line.
    Extended,
    /// Structural clone of a published prompt with adjusted rubric.
    Reconstructed,
    /// Defined by this crate.
    Original,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    #[serde(default)]
    pub system: String,
    pub user: String,
    #[serde(default = "default_provenance")]
    pub provenance: Provenance,
    #[serde(skip)]
    slots: Vec<String>,
}

fn default_provenance() -> Provenance {
    Provenance::Original
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

#[derive(Debug, PartialEq)]
enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn is_slot_name(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

fn pieces(body: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(open) = rest.find("{{") {
        let after = &rest[open + 2..];
        match after.find("}}") {
            Some(close) if is_slot_name(&after[..close]) => {
                if open > 0 {
                    out.push(Piece::Text(&rest[..open]));
                }
                out.push(Piece::Slot(&after[..close]));
                rest = &after[close + 2..];
            }
            _ => {
                out.push(Piece::Text(&rest[..open + 2]));
                rest = after;
            }
        }
    }
    if !rest.is_empty() {
        out.push(Piece::Text(rest));
    }
    out
}

fn slots_in(body: &str) -> BTreeSet<String> {
    pieces(body)
        .into_iter()
        .filter_map(|p| match p {
            Piece::Slot(s) => Some(s.to_string()),
            Piece::Text(_) => None,
        })
        .collect()
}

impl PromptTemplate {
    pub fn new(
        id: impl Into<String>,
        system: impl Into<String>,
        user: impl Into<String>,
        provenance: Provenance,
    ) -> Self {
        let mut t = Self {
            id: id.into(),
            system: system.into(),
            user: user.into(),
            provenance,
            slots: Vec::new(),
        };
        t.refresh_slots();
        t
    }

    /// Checks the body against an explicitly declared slot list.
    pub fn with_declared_slots(self, declared: &[&str]) -> Result<Self, TemplateError> {
        let declared_set: BTreeSet<String> = declared.iter().map(|s| s.to_string()).collect();
        let used: BTreeSet<String> = self.slots.iter().cloned().collect();
        if declared_set != used {
            return Err(TemplateError::SlotListMismatch {
                template: self.id,
                declared: declared_set.into_iter().collect(),
                used: used.into_iter().collect(),
            });
        }
        Ok(self)
    }

    fn refresh_slots(&mut self) {
        let mut all = slots_in(&self.system);
        all.extend(slots_in(&self.user));
        self.slots = all.into_iter().collect();
    }

    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    fn render_body(&self, body: &str, bindings: &BTreeMap<&str, &str>) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(body.len());
        for piece in pieces(body) {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot(s) => match bindings.get(s) {
                    Some(v) => out.push_str(v),
                    None => {
                        return Err(TemplateError::MissingSlot {
                            template: self.id.clone(),
                            slot: s.to_string(),
                        })
                    }
                },
            }
        }
        Ok(out)
    }

    pub fn render(&self, bindings: &BTreeMap<&str, &str>) -> Result<RenderedPrompt, TemplateError> {
        Ok(RenderedPrompt {
            system: self.render_body(&self.system, bindings)?,
            user: self.render_body(&self.user, bindings)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, PromptTemplate>,
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateRegistry {
    pub fn empty() -> Self {
        Self {
            templates: BTreeMap::new(),
        }
    }

    /// Registry holding every prompt the loop needs.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        for t in builtin_templates() {
            r.insert(t);
        }
        r
    }

    /// Adds or replaces a template.
    pub fn insert(&mut self, mut template: PromptTemplate) {
        template.refresh_slots();
        self.templates.insert(template.id.clone(), template);
    }

    pub fn get(&self, id: &str) -> Result<&PromptTemplate, TemplateError> {
        self.templates
            .get(id)
            .ok_or_else(|| TemplateError::UnknownTemplate(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.templates.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn render(
        &self,
        id: &str,
        bindings: &BTreeMap<&str, &str>,
    ) -> Result<RenderedPrompt, TemplateError> {
        self.get(id)?.render(bindings)
    }
}

const GENERATE_SYSTEM: &str = "You are an AI assistant specializing in academic research, particularly in artificial intelligence and machine learning. Your primary role is to assist researchers in formulating well-structured and theoretically grounded hypotheses, reviewing literature, and designing experimental methodologies.

When helping with research hypotheses, ensure they are:

1. Clearly framed within the current research landscape, identifying existing gaps.

2. Grounded in strong theoretical foundations with relevant prior work.

3. Precise and testable, specifying independent and dependent variables.

4. Innovative and methodologically rigorous, distinguishing from existing approaches.

5. Expected to contribute meaningfully to the research community.

Always provide well-structured, concise, and publication-worthy responses. If clarification is needed, ask follow-up questions.";

const GENERATE_USER: &str = "You are a senior research expert specializing in artificial intelligence. Your task is to propose a well-structured and theoretically grounded research hypothesis for a novel research problem that is suitable for publication in top-tier conferences and journals.

Instructions for Generating the Research Hypothesis:

Carefully analyze the given research question and develop a comprehensive, testable, and impactful hypothesis by incorporating the following key elements:

1. Research Background & Problem Statement:

- Clearly describe the current state of research, existing challenges, and the core problem your hypothesis addresses.

2. Theoretical Foundations:

- Reference relevant prior work to justify the hypothesis, highlight unresolved gaps, and establish the rationale for your approach.

3. Hypothesis Statement:

- Formulate a precise and testable hypothesis, specifying the independent and dependent variables and their expected relationship.

4. Methodology & Innovation:

- Outline the proposed research methodology, emphasizing the key ideas, novel contributions, and how it differs from existing approaches.

5. Expected Contributions & Impact:

- Discuss the anticipated theoretical and practical contributions of the research, as well as its potential significance for the AI community.

The research question you need to solve is: {{research_question}}

Carefully analyze the provided research question and construct a complete and coherent research hypothesis that meets high academic standards. The hypothesis should be written as a single, well-organized paragraph, ensuring logical flow and clarity. Avoid using bullet points, section headings, or Markdown formatting. Instead, provide a fluent and natural explanation as seen in top-tier research papers.";

const NOVELTY_SYSTEM: &str = "You are a professor in the {{keyword_content}} field, and you make a judgment about the novelty of a research hypothesis.";

const NOVELTY_USER: &str = "You are an expert in an academic research field tasked with evaluating the novelty of a Hypothesis in the context of a given research Question. Novelty is defined as the degree to which a hypothesis is unique or innovative relative to existing knowledge or common methods. The background of existing knowledge can be inferred from the field of study and does not rely on specific documentary evidence.

Follow these steps to evaluate:

1. Understand the field and context of the research Question.

2. Analyze whether hypotheses suggest new ideas, approaches, or mechanisms that have not been fully explored.

3. Give a score (0–1) based on the degree of novelty, following the criteria:

- 0: not new at all, and highly coincident with common knowledge.

- 0.5: Medium novelty, partly based on existing knowledge but somewhat extended.

- 1: Highly novel, proposing a new perspective or approach.

4. Briefly explain the reason for your rating (optional, but helpful).

Input:

Hypothesis: {{hypothesis}}

Question: {{question}}

Output format (strictly adhered to):

<novelty>{your novelty rating}</novelty>";

const RELEVANCE_SYSTEM: &str = "You are a professor in the {{keyword_content}} field, and you make a judgment about the relevance of a research hypothesis.";

const RELEVANCE_USER: &str = "You are an expert in an academic research field tasked with evaluating the relevance of a Hypothesis in the context of a given research Question. Relevance is defined as the degree to which a hypothesis is closely aligned with the core research Question and can help address it either directly or indirectly.

Follow these steps to evaluate:

1. Understand the field and context of the research Question.

2. Analyze whether the hypothesis targets the problem posed by the Question rather than an adjacent or unrelated problem.

3. Give a score (0–1) based on the degree of relevance, following the criteria:

- 0: unrelated to the research Question.

- 0.5: Medium relevance, addresses part of the Question or addresses it only indirectly.

- 1: Highly relevant, directly addresses the core of the Question.

4. Briefly explain the reason for your rating (optional, but helpful).

Input:

Hypothesis: {{hypothesis}}

Question: {{question}}

Output format (strictly adhered to):

<relevance>{your relevance rating}</relevance>";

const FEASIBILITY_SYSTEM: &str = "You are a professor in the {{keyword_content}} field, and you make a judgment about the feasibility of a research hypothesis.";

const FEASIBILITY_USER: &str = "You are an expert in an academic research field tasked with evaluating the feasibility of a Hypothesis in the context of a given research Question. Feasibility is defined as the degree to which a hypothesis can be tested in the real world through experimentation, data analysis, or other scientific methods with realistic resources.

Follow these steps to evaluate:

1. Understand the field and context of the research Question.

2. Analyze whether the hypothesis names measurable variables and a practical way to test them.

3. Give a score (0–1) based on the degree of feasibility, following the criteria:

- 0: not testable, or testing would require resources that do not exist.

- 0.5: Medium feasibility, testable in principle but with substantial practical obstacles.

- 1: Highly feasible, testable with standard methods and available resources.

4. Briefly explain the reason for your rating (optional, but helpful).

Input:

Hypothesis: {{hypothesis}}

Question: {{question}}

Output format (strictly adhered to):

<feasibility>{your feasibility rating}</feasibility>";

const LIKELIHOOD_SYSTEM: &str = "You are a professor in the {{keyword_content}} field, and you make a judgment about the likelihood of a research hypothesis.";

const BASE_LIKELIHOOD_USER: &str = "Estimate the probability (0–1) that this evidence would be observed if the hypothesis is true.

Input:

Evidence: {{knowledge_content}}

Hypothesis: {{hypothesis}}

Output format strictly adhered to: <base_LH>{your match score}</base_LH>";

const METHOD_MATCH_USER: &str = "Input:

Research question: {{question}}

Evidence: {{knowledge_content}}

Hypothesis: {{hypothesis}}

Check if the evidence contains methodologies supporting the hypothesis.

Return 1 if matched, 0 if not, with a brief explanation.

Output format strictly adhered to: <match>{your match score}</match>";

const REFINE_USER: &str = "You are an expert academic researcher specializing in hypothesis optimization within artificial intelligence research. Select ONE strategy below and state it exactly as shown:

A. Deepening

- Drill into causal mechanisms, define measurable variables, and tighten logical flow without adding new constructs.

B. Counterfactual

- Formulate the strongest plausible counter-hypothesis, rebut it with evidence, then revise the original hypothesis to survive the challenge.

C. Hybridization

- Import a concept or method from another discipline, integrate it with current evidence, and craft a hybrid hypothesis leveraging both domains.

Context

Research Question: {{research_question}}

Current Hypothesis: {{hypothesis}}

Evidence Snippets (top 5): {{evidence_snippets}}

Task

Using ONLY the chosen strategy, optimize the hypothesis to better address the research question while keeping it concise, precise, and empirically testable.

Output Format

Respond with a JSON object containing your optimized hypothesis and the optimization strategy:

{
\"optimized hypothesis\": \"<your optimized hypothesis>\",
\"strategy\": \"<A | B | C>\"
}

Recommended strategy for this hypothesis: {{strategy_hint}}";

const JUDGE_SYSTEM: &str = "You are a senior reviewer for a top-tier {{keyword_content}} venue. You compare two research hypotheses written for the same research question and decide which one is stronger.";

const JUDGE_USER: &str = "Research question: {{research_question}}

Hypothesis A: {{hypothesis_a}}

Hypothesis B: {{hypothesis_b}}

Weigh novelty, relevance to the research question, and feasibility of empirical testing. Decide which hypothesis is better overall. Ties are not allowed.

Output format strictly adhered to: <winner>{A or B}</winner>";

fn builtin_templates() -> Vec<PromptTemplate> {
    use Provenance::*;
    vec![
        PromptTemplate::new(GENERATE, GENERATE_SYSTEM, GENERATE_USER, Published),
        PromptTemplate::new(NOVELTY, NOVELTY_SYSTEM, NOVELTY_USER, Published),
        PromptTemplate::new(RELEVANCE, RELEVANCE_SYSTEM, RELEVANCE_USER, Reconstructed),
        PromptTemplate::new(FEASIBILITY, FEASIBILITY_SYSTEM, FEASIBILITY_USER, Reconstructed),
        PromptTemplate::new(BASE_LIKELIHOOD, LIKELIHOOD_SYSTEM, BASE_LIKELIHOOD_USER, Published),
        PromptTemplate::new(METHOD_MATCH, LIKELIHOOD_SYSTEM, METHOD_MATCH_USER, Published),
        PromptTemplate::new(REFINE, "", REFINE_USER, Extended),
        PromptTemplate::new(JUDGE, JUDGE_SYSTEM, JUDGE_USER, Original),
    ]
}
