//! Scene-graph JSON documents.
//!
//! ```json
//! {
//!   "frame_id": "oven-0001",
//!   "image": {"width": 640, "height": 480},
//!   "entities": [{"id": "e1", "label": "person", "category": "person", "bbox": [150, 140, 100, 200]}],
//!   "relations": [{"head": "e1", "predicate": "taking", "tail": "e3", "confidence": 1.0}]
//! }
//! ```
//!
//! `image`, `bbox` and `confidence` (default 1.0) are optional. Unknown
//! keys are ignored.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::IoError;
use crate::graph::{build_graph, BBox, Category, Entity, ImageDims, Relation, SceneGraph};

pub fn parse_scene_graph(path: impl AsRef<Path>) -> Result<SceneGraph, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IoError::Read {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_scene_graph_str(&text)
}

pub fn parse_scene_graph_str(text: &str) -> Result<SceneGraph, IoError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))?;
    let root = doc
        .as_object()
        .ok_or_else(|| schema("$", "expected an object"))?;

    let frame_id = req_str(root, "frame_id", "frame_id")?.to_string();

    let dims = match root.get("image") {
        None | Some(Value::Null) => None,
        Some(v) => {
            let img = v
                .as_object()
                .ok_or_else(|| schema("image", "expected an object"))?;
            let width = req_dim(img, "width", "image.width")?;
            let height = req_dim(img, "height", "image.height")?;
            Some(ImageDims::new(width, height))
        }
    };

    let mut entities = Vec::new();
    for (i, v) in req_array(root, "entities", "entities")?.iter().enumerate() {
        let at = format!("entities[{i}]");
        let obj = v
            .as_object()
            .ok_or_else(|| schema(&at, "expected an object"))?;
        let id = req_str(obj, "id", &format!("{at}.id"))?;
        if id.is_empty() {
            return Err(schema(format!("{at}.id"), "must be nonempty"));
        }
        let label = req_str(obj, "label", &format!("{at}.label"))?;
        if label.trim().is_empty() {
            return Err(schema(format!("{at}.label"), "must be nonempty"));
        }
        let category: Category = req_str(obj, "category", &format!("{at}.category"))?
            .parse()
            .map_err(|m: String| schema(format!("{at}.category"), m))?;
        let mut entity = Entity::perceived(id, label, category);
        if let Some(b) = obj.get("bbox").filter(|b| !b.is_null()) {
            entity.bbox = Some(parse_bbox(b, &format!("{at}.bbox"), dims)?);
        }
        entities.push(entity);
    }

    let mut relations = Vec::new();
    for (i, v) in req_array(root, "relations", "relations")?
        .iter()
        .enumerate()
    {
        let at = format!("relations[{i}]");
        let obj = v
            .as_object()
            .ok_or_else(|| schema(&at, "expected an object"))?;
        let head = req_str(obj, "head", &format!("{at}.head"))?;
        let tail = req_str(obj, "tail", &format!("{at}.tail"))?;
        let predicate = req_str(obj, "predicate", &format!("{at}.predicate"))?;
        if predicate.trim().is_empty() {
            return Err(schema(format!("{at}.predicate"), "must be nonempty"));
        }
        let confidence = match obj.get("confidence") {
            None | Some(Value::Null) => 1.0,
            Some(c) => {
                let c = c
                    .as_f64()
                    .ok_or_else(|| schema(format!("{at}.confidence"), "expected a number"))?;
                if !(c > 0.0 && c <= 1.0) {
                    return Err(schema(format!("{at}.confidence"), "must lie in (0, 1]"));
                }
                c
            }
        };
        relations.push(Relation::perceived(head, predicate, tail).with_confidence(confidence));
    }

    Ok(build_graph(entities, relations, frame_id, dims)?)
}

/// Canonical JSON for the perceived view of a graph: stable key order,
/// entities by id, relations in insertion order.
pub fn scene_graph_to_json(graph: &SceneGraph) -> String {
    let mut root = Map::new();
    root.insert("frame_id".into(), json!(graph.frame_id()));
    if let Some(d) = graph.dims() {
        root.insert(
            "image".into(),
            json!({"width": d.width, "height": d.height}),
        );
    }
    let entities: Vec<Value> = graph
        .entities()
        .map(|e| {
            let mut m = Map::new();
            m.insert("id".into(), json!(e.id));
            m.insert("label".into(), json!(e.label));
            m.insert("category".into(), json!(e.category.as_str()));
            if let Some(b) = e.bbox {
                m.insert("bbox".into(), json!([b.x, b.y, b.width, b.height]));
            }
            Value::Object(m)
        })
        .collect();
    root.insert("entities".into(), Value::Array(entities));
    let relations: Vec<Value> = graph
        .relations()
        .iter()
        .map(|r| {
            json!({
                "head": r.head,
                "predicate": r.predicate,
                "tail": r.tail,
                "confidence": r.confidence,
            })
        })
        .collect();
    root.insert("relations".into(), Value::Array(relations));
    let mut out =
        serde_json::to_string_pretty(&Value::Object(root)).expect("json values serialize");
    out.push('\n');
    out
}

fn parse_bbox(v: &Value, at: &str, dims: Option<ImageDims>) -> Result<BBox, IoError> {
    let arr = v
        .as_array()
        .ok_or_else(|| schema(at, "expected [x, y, width, height]"))?;
    if arr.len() != 4 {
        return Err(schema(at, "expected [x, y, width, height]"));
    }
    let mut vals = [0.0; 4];
    for (slot, item) in vals.iter_mut().zip(arr) {
        *slot = item
            .as_f64()
            .ok_or_else(|| schema(at, "coordinates must be numbers"))?;
    }
    let bbox = BBox::new(vals[0], vals[1], vals[2], vals[3]);
    if !bbox.is_well_formed() {
        return Err(schema(at, "coordinates must be non-negative"));
    }
    match dims {
        None => return Err(schema(at, "a bbox requires image dimensions")),
        Some(d) if !bbox.fits_within(d) => return Err(schema(at, "bbox exceeds the image")),
        Some(_) => {}
    }
    Ok(bbox)
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn req_str<'a>(obj: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a str, IoError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(schema(at, "expected a string")),
        None => Err(schema(at, "missing field")),
    }
}

fn req_array<'a>(
    obj: &'a Map<String, Value>,
    key: &str,
    at: &str,
) -> Result<&'a Vec<Value>, IoError> {
    match obj.get(key) {
        Some(Value::Array(a)) => Ok(a),
        Some(_) => Err(schema(at, "expected an array")),
        None => Err(schema(at, "missing field")),
    }
}

fn req_dim(obj: &Map<String, Value>, key: &str, at: &str) -> Result<u32, IoError> {
    obj.get(key)
        .and_then(Value::as_u64)
        .filter(|&n| n > 0 && n <= u64::from(u32::MAX))
        .map(|n| n as u32)
        .ok_or_else(|| schema(at, "expected a positive integer"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphError;

    const SMALL: &str = r#"{
        "frame_id": "f1",
        "image": {"width": 100, "height": 80},
        "entities": [
            {"id": "e1", "label": "Person", "category": "person", "bbox": [10, 10, 20, 40]},
            {"id": "e2", "label": "cup", "category": "object"}
        ],
        "relations": [{"head": "e1", "predicate": "holding", "tail": "e2"}]
    }"#;

    #[test]
    fn parses_and_defaults_confidence() {
        let g = parse_scene_graph_str(SMALL).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (2, 1));
        assert_eq!(g.relations()[0].confidence, 1.0);
        assert_eq!(g.entity("e1").unwrap().label, "person");
    }

    #[test]
    fn empty_entity_list_is_valid() {
        let g =
            parse_scene_graph_str(r#"{"frame_id": "x", "entities": [], "relations": []}"#).unwrap();
        assert!(g.is_empty());
    }

    #[test]
    fn schema_errors_carry_paths() {
        let bad_bbox = r#"{"frame_id": "x", "image": {"width": 10, "height": 10},
            "entities": [{"id": "a", "label": "x", "category": "object", "bbox": [-1, 0, 5, 5]}], "relations": []}"#;
        match parse_scene_graph_str(bad_bbox).unwrap_err() {
            IoError::Schema { path, .. } => assert_eq!(path, "entities[0].bbox"),
            other => panic!("{other:?}"),
        }
        let bad_cat = r#"{"frame_id": "x", "entities": [{"id": "a", "label": "x", "category": "robot"}], "relations": []}"#;
        assert!(
            matches!(parse_scene_graph_str(bad_cat), Err(IoError::Schema { path, .. }) if path == "entities[0].category")
        );
        let bad_conf = r#"{"frame_id": "x", "entities": [{"id": "a", "label": "x", "category": "object"},
            {"id": "b", "label": "y", "category": "object"}],
            "relations": [{"head": "a", "predicate": "p", "tail": "b", "confidence": 2}]}"#;
        assert!(
            matches!(parse_scene_graph_str(bad_conf), Err(IoError::Schema { path, .. }) if path == "relations[0].confidence")
        );
        let missing = r#"{"entities": [], "relations": []}"#;
        assert!(
            matches!(parse_scene_graph_str(missing), Err(IoError::Schema { path, .. }) if path == "frame_id")
        );
        assert!(matches!(parse_scene_graph_str("{"), Err(IoError::Json(_))));
    }

    #[test]
    fn graph_errors_pass_through() {
        let dangling = r#"{"frame_id": "x", "entities": [{"id": "e1", "label": "x", "category": "object"}],
            "relations": [{"head": "e1", "predicate": "holding", "tail": "e9"}]}"#;
        match parse_scene_graph_str(dangling).unwrap_err() {
            IoError::Graph(GraphError::DanglingEndpoint(id)) => assert_eq!(id, "e9"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn canonical_round_trip() {
        let g = parse_scene_graph_str(SMALL).unwrap();
        let text = scene_graph_to_json(&g);
        let again = parse_scene_graph_str(&text).unwrap();
        assert_eq!(g, again);
        assert_eq!(text, scene_graph_to_json(&again));
    }
}
