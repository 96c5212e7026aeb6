//! End-to-end run: parse → enrich → ground → sentiment → propagate → pool
//! → decide, plus completion and planning in `suggest` mode.

use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::action::{complete_and_rank, ActionPlan, CompletionParams};
use crate::enrich::{enrich_logged, ground, EnrichmentParams, ProvenanceEntry};
use crate::graph::SceneGraph;
use crate::io::parse_scene_graph;
use crate::knowledge::{ConnotationLexicon, KnowledgeBase};
use crate::risk::{
    assign_sentiment, decide, pool_risk, propagate, Contribution, RiskParams, SentimentTrace,
    Verdict,
};

pub const REPORT_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "assist-reasoner";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Assess,
    Suggest,
}

/// Every tunable, echoed verbatim into each report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct Config {
    pub enrichment: EnrichmentParams,
    pub risk: RiskParams,
    pub completion: CompletionParams,
    pub child_present: bool,
}

impl Config {
    pub fn validate(&self) -> Result<(), crate::ParamError> {
        self.enrichment.validate()?;
        self.risk.validate()?;
        self.completion.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Config,
    Parse,
    LoadKb,
    LoadLexicon,
    Enrich,
    Ground,
    Sentiment,
    Propagate,
    Pool,
    Decide,
    Complete,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Parse => "parse",
            Stage::LoadKb => "load-kb",
            Stage::LoadLexicon => "load-lexicon",
            Stage::Enrich => "enrich",
            Stage::Ground => "ground",
            Stage::Sentiment => "sentiment",
            Stage::Propagate => "propagate",
            Stage::Pool => "pool",
            Stage::Decide => "decide",
            Stage::Complete => "complete",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{stage}: {message}")]
    Input { stage: Stage, message: String },
    #[error("{stage}: internal error: {message}")]
    Internal { stage: Stage, message: String },
}

impl PipelineError {
    fn input(stage: Stage, e: impl fmt::Display) -> Self {
        PipelineError::Input {
            stage,
            message: e.to_string(),
        }
    }

    fn internal(stage: Stage, e: impl fmt::Display) -> Self {
        PipelineError::Internal {
            stage,
            message: e.to_string(),
        }
    }

    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Input { stage, .. } | PipelineError::Internal { stage, .. } => *stage,
        }
    }

    /// 1 for bad input, 2 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input { .. } => 1,
            PipelineError::Internal { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Inputs {
    pub graph: Option<String>,
    pub kb: Option<String>,
    pub lexicon: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnrichmentSummary {
    pub added_nodes: usize,
    pub added_edges: usize,
    pub nodes_after_grounding: usize,
    /// Where the provenance log was written, if it was requested.
    pub log: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub report_version: u32,
    pub tool: ToolInfo,
    pub mode: Mode,
    pub frame_id: String,
    pub inputs: Inputs,
    pub config: Config,
    pub verdict: Verdict,
    pub risk: f64,
    pub effective_threshold: f64,
    pub child_context: bool,
    pub iterations_used: usize,
    pub graph_sentiment: f64,
    pub contributions: Vec<Contribution>,
    pub enrichment: EnrichmentSummary,
    pub action: Option<ActionPlan>,
    pub note: Option<String>,
}

impl Report {
    /// Pretty JSON with a trailing newline; key order follows the struct.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// 0 for a safe verdict, 3 for unsafe.
    pub fn exit_code(&self) -> i32 {
        match self.verdict {
            Verdict::Safe => 0,
            Verdict::Unsafe => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: Report,
    /// Final graph: sentiment-weighted, and completed in `suggest` mode.
    pub graph: SceneGraph,
    pub provenance: Vec<ProvenanceEntry>,
}

/// Loads the three inputs and runs the pipeline.
pub fn run_pipeline(
    graph_path: impl AsRef<Path>,
    kb_path: impl AsRef<Path>,
    lexicon_path: impl AsRef<Path>,
    config: &Config,
    mode: Mode,
) -> Result<PipelineOutput, PipelineError> {
    config
        .validate()
        .map_err(|e| PipelineError::input(Stage::Config, e))?;
    let graph = parse_scene_graph(graph_path.as_ref())
        .map_err(|e| PipelineError::input(Stage::Parse, e))?;
    let kb = KnowledgeBase::load(kb_path.as_ref())
        .map_err(|e| PipelineError::input(Stage::LoadKb, e))?;
    let lexicon = ConnotationLexicon::load(lexicon_path.as_ref())
        .map_err(|e| PipelineError::input(Stage::LoadLexicon, e))?;
    let mut out = run_loaded(&graph, &kb, &lexicon, config, mode)?;
    out.report.inputs = Inputs {
        graph: Some(graph_path.as_ref().display().to_string()),
        kb: Some(kb_path.as_ref().display().to_string()),
        lexicon: Some(lexicon_path.as_ref().display().to_string()),
    };
    Ok(out)
}

/// Runs the pipeline on already-loaded inputs.
pub fn run_loaded(
    graph: &SceneGraph,
    kb: &KnowledgeBase,
    lexicon: &ConnotationLexicon,
    config: &Config,
    mode: Mode,
) -> Result<PipelineOutput, PipelineError> {
    config
        .validate()
        .map_err(|e| PipelineError::input(Stage::Config, e))?;

    let enriched = enrich_logged(graph, kb, &config.enrichment);
    let added_nodes = enriched.graph.node_count() - graph.node_count();
    let added_edges = enriched.graph.edge_count() - graph.edge_count();
    let grounded = ground(&enriched.graph, kb);
    if grounded.node_count() > enriched.graph.node_count() {
        return Err(PipelineError::internal(
            Stage::Ground,
            "grounding increased the node count",
        ));
    }

    let pass = assign_sentiment(&grounded, lexicon, &config.risk);
    let propagated = propagate(&pass.graph, &config.risk);
    let risk = pool_risk(&propagated.graph);
    if !(0.0..=1.0).contains(&risk) {
        return Err(PipelineError::internal(
            Stage::Pool,
            format!("risk {risk} outside [0, 1]"),
        ));
    }
    let trace = SentimentTrace {
        nodes: pass.nodes,
        iterations_used: propagated.iterations_used,
    };
    let assessment = decide(
        &propagated.graph,
        risk,
        &config.risk,
        config.child_present,
        &trace,
    );

    let mut final_graph = propagated.graph;
    let (action, note) = match (mode, assessment.verdict) {
        (Mode::Assess, _) => (None, None),
        (Mode::Suggest, Verdict::Safe) => (
            None,
            Some("verdict is safe; no assistive action needed".to_string()),
        ),
        (Mode::Suggest, Verdict::Unsafe) => {
            let completion = complete_and_rank(
                &final_graph,
                kb,
                lexicon,
                assessment.verdict,
                &config.completion,
            )
            .map_err(|e| PipelineError::internal(Stage::Complete, e))?;
            final_graph = completion.graph.clone();
            let plan = completion.into_plan();
            let note = plan
                .ranked
                .is_empty()
                .then(|| "no remedy found in the knowledge base; warn the user".to_string());
            (Some(plan), note)
        }
    };

    let report = Report {
        report_version: REPORT_VERSION,
        tool: ToolInfo {
            name: TOOL_NAME,
            version: env!("CARGO_PKG_VERSION"),
        },
        mode,
        frame_id: graph.frame_id().to_string(),
        inputs: Inputs::default(),
        config: *config,
        verdict: assessment.verdict,
        risk: assessment.risk,
        effective_threshold: assessment.effective_threshold,
        child_context: assessment.child_context,
        iterations_used: assessment.iterations_used,
        graph_sentiment: final_graph.graph_sentiment(),
        contributions: assessment.contributions,
        enrichment: EnrichmentSummary {
            added_nodes,
            added_edges,
            nodes_after_grounding: grounded.node_count(),
            log: None,
        },
        action,
        note,
    };
    Ok(PipelineOutput {
        report,
        graph: final_graph,
        provenance: enriched.log,
    })
}
