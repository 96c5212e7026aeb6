//! Commonsense reasoning over perceived scene graphs.
//!
//! A scene graph is enriched from a commonsense triple base, its generic
//! concepts are grounded onto perceived instances, nodes are weighted by
//! connotation and proximity to people, and the pooled risk decides
//! whether the activity is unsafe. For unsafe scenes the graph is completed
//! with positively connoted remedies and the best object to bring is
//! selected, falling back to a warning.

pub mod action;
pub mod enrich;
pub mod graph;
pub mod io;
pub mod knowledge;
pub mod pipeline;
pub mod risk;
pub mod text;

pub use action::{
    candidate_remedies, complete_and_rank, plan, ActionPlan, CompletionParams, Directive,
    RemedyCandidate,
};
pub use enrich::{context_confidence, enrich, enrich_logged, ground, EnrichmentParams};
pub use graph::{
    build_graph, BBox, Category, Entity, GraphError, ImageDims, Provenance, Relation, SceneGraph,
};
pub use knowledge::{ConnotationLexicon, KnowledgeBase, KnowledgeError, RelationKind, Triple};
pub use pipeline::{run_loaded, run_pipeline, Config, Mode, PipelineError, Report};
pub use risk::{
    assign_sentiment, decide, pool_risk, propagate, RiskAssessment, RiskParams, Verdict,
};

use thiserror::Error;

/// A parameter outside its admissible range.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid parameter {name}: {reason}")]
pub struct ParamError {
    pub name: &'static str,
    pub reason: &'static str,
}

impl ParamError {
    pub(crate) fn new(name: &'static str, reason: &'static str) -> Self {
        ParamError { name, reason }
    }
}
