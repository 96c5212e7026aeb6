//! File formats: scene-graph JSON and the ActionGenome adapter.

mod action_genome;
mod scene;

pub use action_genome::{
    convert_action_genome, convert_action_genome_logged, Conversion, SIDECAR_LOG,
};
pub use scene::{parse_scene_graph, parse_scene_graph_str, scene_graph_to_json};

use thiserror::Error;

use crate::graph::GraphError;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("{file}{}: {message}", record.map(|r| format!(" record {r}")).unwrap_or_default())]
    Annotation {
        file: String,
        record: Option<usize>,
        message: String,
    },
}
