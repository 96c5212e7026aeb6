//! Scene-graph enrichment from the commonsense base, and grounding of
//! generic concepts onto perceived instances.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::graph::{Entity, Relation, SceneGraph};
use crate::knowledge::{KnowledgeBase, Triple};
use crate::text::clean_word;
use crate::ParamError;

/// Predicate of the edge linking a grounded concept to its perceived instance.
pub const GROUNDED_IN: &str = "grounded in";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnrichmentParams {
    pub top_k: usize,
    pub min_confidence: f64,
    pub max_depth: usize,
}

impl Default for EnrichmentParams {
    fn default() -> Self {
        EnrichmentParams {
            top_k: 3,
            min_confidence: 0.5,
            max_depth: 1,
        }
    }
}

impl EnrichmentParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.top_k < 1 {
            return Err(ParamError::new("top_k", "must be at least 1"));
        }
        if self.max_depth < 1 {
            return Err(ParamError::new("max_depth", "must be at least 1"));
        }
        if !self.min_confidence.is_finite() || self.min_confidence < 0.0 {
            return Err(ParamError::new(
                "min_confidence",
                "must be a finite value >= 0",
            ));
        }
        Ok(())
    }
}

/// One added edge (and possibly node), with the score that admitted it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProvenanceEntry {
    pub depth: usize,
    pub source: String,
    pub triple: Triple,
    pub score: f64,
    pub edge_confidence: f64,
    pub node: String,
    pub new_node: bool,
}

impl fmt::Display for ProvenanceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "depth={} source={} triple={} score={} confidence={} node={}{}",
            self.depth,
            self.source,
            self.triple,
            self.score,
            self.edge_confidence,
            self.node,
            if self.new_node { " (new)" } else { "" }
        )
    }
}

#[derive(Debug, Clone)]
pub struct Enrichment {
    pub graph: SceneGraph,
    pub log: Vec<ProvenanceEntry>,
}

/// `weight × (1 + overlap)`, where overlap counts distinct perceived labels
/// that either appear as a token of the candidate tail or are a hyponym
/// (`IsA`) of one of its tokens.
pub fn context_confidence(graph: &SceneGraph, candidate: &Triple, kb: &KnowledgeBase) -> f64 {
    let tail_tokens: BTreeSet<String> = kb.tokens(&candidate.tail).into_iter().collect();
    let overlap = graph
        .perceived_labels()
        .iter()
        .filter(|label| {
            let folded = kb.tokens(label).join(" ");
            tail_tokens.contains(&folded)
                || tail_tokens
                    .iter()
                    .any(|t| kb.is_a(label, t) || kb.is_a(&folded, t))
        })
        .count();
    candidate.weight * (1.0 + overlap as f64)
}

pub fn enrich(graph: &SceneGraph, kb: &KnowledgeBase, params: &EnrichmentParams) -> SceneGraph {
    enrich_logged(graph, kb, params).graph
}

/// Breadth-first expansion from the perceived entities, up to
/// `max_depth` hops. Each source keeps its `top_k` candidates scoring at
/// least `min_confidence`; one commonsense node is created per distinct
/// tail label and reused afterwards. Perceived nodes and edges are never
/// touched.
pub fn enrich_logged(
    graph: &SceneGraph,
    kb: &KnowledgeBase,
    params: &EnrichmentParams,
) -> Enrichment {
    let mut out = graph.clone();
    let mut log = Vec::new();
    let top_k = params.top_k.max(1);
    let mut frontier = graph.perceived_ids();

    for depth in 1..=params.max_depth.max(1) {
        let mut next = Vec::new();
        for source in &frontier {
            let source_label = match out.entity(source) {
                Some(e) => e.label.clone(),
                None => continue,
            };
            let mut scored: Vec<(Triple, f64)> = kb
                .outgoing(&source_label)
                .into_iter()
                .map(|t| {
                    let s = context_confidence(graph, &t, kb);
                    (t, s)
                })
                .collect();
            let Some(max_score) = scored.iter().map(|(_, s)| *s).reduce(f64::max) else {
                continue;
            };
            scored.retain(|(_, s)| *s >= params.min_confidence);
            scored.sort_by(|(ta, sa), (tb, sb)| {
                sb.total_cmp(sa)
                    .then_with(|| (ta.relation, &ta.tail).cmp(&(tb.relation, &tb.tail)))
            });
            scored.truncate(top_k);

            for (triple, score) in scored {
                if triple.tail == source_label {
                    continue;
                }
                let (node, new_node) = match find_enriched(&out, &triple.tail) {
                    Some(id) => (id, false),
                    None => {
                        let id = out.fresh_id(&format!("kb:{}", triple.tail));
                        out.insert_entity(Entity::enriched(id.clone(), &triple.tail));
                        (id, true)
                    }
                };
                if node == *source {
                    continue;
                }
                let edge_confidence = score / max_score;
                let edge = Relation::enriched(
                    source.clone(),
                    triple.relation.predicate(),
                    node.clone(),
                    edge_confidence,
                );
                let added = out
                    .add_relation(edge)
                    .expect("endpoints exist and confidence is in (0, 1]");
                if new_node {
                    next.push(node.clone());
                }
                if added || new_node {
                    log.push(ProvenanceEntry {
                        depth,
                        source: source.clone(),
                        triple,
                        score,
                        edge_confidence,
                        node,
                        new_node,
                    });
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Enrichment { graph: out, log }
}

fn find_enriched(graph: &SceneGraph, label: &str) -> Option<String> {
    graph
        .entities()
        .find(|e| !e.is_perceived() && e.label == label)
        .map(|e| e.id.clone())
}

/// Specializes enriched concepts to perceived instances.
///
/// A word `t` of an enriched label is rewritten to the label of the first
/// perceived entity `Y` (by id) with `Y IsA t`, or whose label is `t`
/// itself, and a `grounded in` edge to `Y` is added. An enriched node whose
/// rewritten label equals a perceived label is merged into that entity.
pub fn ground(graph: &SceneGraph, kb: &KnowledgeBase) -> SceneGraph {
    let mut out = graph.clone();
    let perceived: Vec<(String, String, String)> = graph
        .entities()
        .filter(|e| e.is_perceived())
        .map(|e| (e.id.clone(), e.label.clone(), kb.tokens(&e.label).join(" ")))
        .collect();
    let enriched: Vec<String> = graph
        .entities()
        .filter(|e| !e.is_perceived())
        .map(|e| e.id.clone())
        .collect();

    for id in enriched {
        let Some(label) = out.entity(&id).map(|e| e.label.clone()) else {
            continue;
        };
        let mut words: Vec<String> = label.split(' ').map(str::to_string).collect();
        let mut anchors: Vec<String> = Vec::new();
        for word in words.iter_mut() {
            let token = kb.tokens(&clean_word(word)).join(" ");
            if token.is_empty() {
                continue;
            }
            let hit = perceived.iter().find(|(_, plabel, folded)| {
                *folded == token || kb.is_a(plabel, &token) || kb.is_a(folded, &token)
            });
            if let Some((pid, plabel, _)) = hit {
                *word = plabel.clone();
                if !anchors.contains(pid) {
                    anchors.push(pid.clone());
                }
            }
        }
        if anchors.is_empty() {
            continue;
        }
        let new_label = words.join(" ");
        // a concept that is now a perceived label becomes that entity
        if let Some((pid, _, _)) = perceived.iter().find(|(_, plabel, _)| *plabel == new_label) {
            out.merge_in_place(pid, &id)
                .expect("distinct, existing ids");
            continue;
        }
        {
            let entity = out.entity_mut(&id).expect("still present");
            entity.label = new_label;
            entity.grounded = true;
        }
        for pid in &anchors {
            out.add_relation(Relation::enriched(
                id.clone(),
                GROUNDED_IN,
                pid.clone(),
                1.0,
            ))
            .expect("endpoints exist");
        }
    }
    out
}
