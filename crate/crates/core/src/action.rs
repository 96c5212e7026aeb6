//! Commonsense response: complete the weighted graph with positively
//! connoted remedies and pick the object to bring, or fall back to a
//! warning.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::graph::{Entity, Provenance, Relation, SceneGraph};
use crate::knowledge::{ConnotationLexicon, KnowledgeBase, Triple};
use crate::risk::Verdict;
use crate::ParamError;

/// Predicate linking a remedy node to the harm it counters.
pub const COUNTERS: &str = "counters";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemedyCandidate {
    pub object_label: String,
    pub score: f64,
    pub source_harm: String,
    pub supporting_triple: Triple,
    /// Human-readable reason, e.g. "glove capable of protect hand, countering heat".
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "object", rename_all = "lowercase")]
pub enum Directive {
    Bring(String),
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionPlan {
    pub directive: Directive,
    pub ranked: Vec<RemedyCandidate>,
    pub iterations: usize,
    pub sentiment_before: f64,
    pub sentiment_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompletionParams {
    pub max_rounds: usize,
    pub epsilon: f64,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams {
            max_rounds: 3,
            epsilon: 1e-3,
        }
    }
}

impl CompletionParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.max_rounds < 1 {
            return Err(ParamError::new("max_rounds", "must be at least 1"));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(ParamError::new("epsilon", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActionError {
    #[error("graph completion requires an unsafe verdict")]
    NotUnsafe,
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub graph: SceneGraph,
    pub ranking: Vec<RemedyCandidate>,
    pub iterations: usize,
    pub sentiment_before: f64,
    pub sentiment_after: f64,
}

impl Completion {
    pub fn into_plan(self) -> ActionPlan {
        ActionPlan {
            iterations: self.iterations,
            sentiment_before: self.sentiment_before,
            sentiment_after: self.sentiment_after,
            ..plan(self.ranking)
        }
    }
}

/// Score descending, then object label ascending.
pub fn ranking_order(a: &RemedyCandidate, b: &RemedyCandidate) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.object_label.cmp(&b.object_label))
}

/// Harm tokens of `harm_id`: its own label tokens plus the tail labels of
/// its outgoing enriched edges.
pub fn harm_tokens(graph: &SceneGraph, kb: &KnowledgeBase, harm_id: &str) -> BTreeSet<String> {
    let Some(harm) = graph.entity(harm_id) else {
        return BTreeSet::new();
    };
    let mut tokens: BTreeSet<String> = kb.tokens(&harm.label).into_iter().collect();
    for r in graph.relations() {
        if r.head == harm_id && r.provenance == Provenance::Enriched {
            if let Some(tail) = graph.entity(&r.tail) {
                tokens.extend(kb.tokens(&tail.label));
            }
        }
    }
    tokens
}

/// Remedies for every negative node, scored
/// `weight × polarity(tail) × severity` and deduplicated by object.
pub fn candidate_remedies(
    graph: &SceneGraph,
    kb: &KnowledgeBase,
    lexicon: &ConnotationLexicon,
) -> Vec<RemedyCandidate> {
    let mut best: BTreeMap<String, RemedyCandidate> = BTreeMap::new();
    for harm in graph.entities().filter(|e| e.sentiment() < 0.0) {
        let tokens = harm_tokens(graph, kb, &harm.id);
        let Ok(remedies) = kb.remedies_for(&tokens) else {
            continue;
        };
        let severity = -harm.sentiment();
        for triple in remedies {
            let benefit = lexicon.polarity(&triple.tail);
            if benefit <= 0.0 {
                continue;
            }
            let score = (triple.weight * benefit * severity).min(1.0);
            if score <= 0.0 {
                continue;
            }
            let candidate = RemedyCandidate {
                object_label: triple.head.clone(),
                score,
                source_harm: harm.id.clone(),
                rationale: format!(
                    "{} {} {}, countering {}",
                    triple.head,
                    triple.relation.predicate(),
                    triple.tail,
                    harm.label
                ),
                supporting_triple: triple,
            };
            match best.get(&candidate.object_label) {
                Some(existing) if existing.score >= candidate.score => {}
                _ => {
                    best.insert(candidate.object_label.clone(), candidate);
                }
            }
        }
    }
    let mut ranked: Vec<_> = best.into_values().collect();
    ranked.sort_by(ranking_order);
    ranked
}

/// Iterative completion: each round adds every candidate as a positive
/// commonsense node wired to its harm with a `counters` edge, then
/// recomputes Σ S_n. Stops once a round improves the sum by less than
/// `epsilon`, or after `max_rounds`.
pub fn complete_and_rank(
    graph: &SceneGraph,
    kb: &KnowledgeBase,
    lexicon: &ConnotationLexicon,
    verdict: Verdict,
    params: &CompletionParams,
) -> Result<Completion, ActionError> {
    if verdict != Verdict::Unsafe {
        return Err(ActionError::NotUnsafe);
    }
    let mut g = graph.clone();
    let before = g.graph_sentiment();
    let mut current = before;
    let mut accumulated: BTreeMap<String, RemedyCandidate> = BTreeMap::new();
    let mut iterations = 0;

    for _ in 0..params.max_rounds.max(1) {
        let candidates = candidate_remedies(&g, kb, lexicon);
        for c in &candidates {
            let node = match remedy_node(&g, &c.object_label) {
                Some(id) => id,
                None => {
                    let id = g.fresh_id(&format!("remedy:{}", c.object_label));
                    g.insert_entity(
                        Entity::enriched(id.clone(), &c.object_label).with_sentiment(c.score),
                    );
                    id
                }
            };
            g.add_relation(Relation::enriched(
                node,
                COUNTERS,
                c.source_harm.clone(),
                c.score,
            ))
            .expect("endpoints exist and score is in (0, 1]");
            match accumulated.get(&c.object_label) {
                Some(prev) if prev.score >= c.score => {}
                _ => {
                    accumulated.insert(c.object_label.clone(), c.clone());
                }
            }
        }
        let updated = g.graph_sentiment();
        if updated - current < params.epsilon {
            current = updated;
            break;
        }
        current = updated;
        iterations += 1;
    }

    let mut ranking: Vec<_> = accumulated.into_values().collect();
    ranking.sort_by(ranking_order);
    Ok(Completion {
        graph: g,
        ranking,
        iterations,
        sentiment_before: before,
        sentiment_after: current,
    })
}

fn remedy_node(graph: &SceneGraph, label: &str) -> Option<String> {
    graph
        .entities()
        .find(|e| e.id.starts_with("remedy:") && e.label == label)
        .map(|e| e.id.clone())
}

/// Bring the best-ranked object, or warn when nothing qualifies.
pub fn plan(mut ranking: Vec<RemedyCandidate>) -> ActionPlan {
    ranking.sort_by(ranking_order);
    let directive = match ranking.first() {
        Some(top) => Directive::Bring(top.object_label.clone()),
        None => Directive::Warn,
    };
    ActionPlan {
        directive,
        ranked: ranking,
        iterations: 0,
        sentiment_before: 0.0,
        sentiment_after: 0.0,
    }
}
