//! Scene-graph data model: grounded entities joined by predicated, directed
//! relations. Multiple relations may link the same ordered pair.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize_label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Person,
    Object,
    Place,
    Attribute,
    Commonsense,
}

impl Category {
    pub fn as_str(&self) -> &'static str {
        match self {
            Category::Person => "person",
            Category::Object => "object",
            Category::Place => "place",
            Category::Attribute => "attribute",
            Category::Commonsense => "commonsense",
        }
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "person" => Ok(Category::Person),
            "object" => Ok(Category::Object),
            "place" => Ok(Category::Place),
            "attribute" => Ok(Category::Attribute),
            "commonsense" => Ok(Category::Commonsense),
            other => Err(format!("unknown category {other:?}")),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether a node or edge came from perception or from the knowledge base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Perceived,
    Enriched,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Perceived => "perceived",
            Provenance::Enriched => "enriched",
        }
    }
}

/// Axis-aligned rectangle in pixels: top-left corner plus extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        BBox {
            x,
            y,
            width,
            height,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.width / 2.0, self.y + self.height / 2.0)
    }

    pub fn is_well_formed(&self) -> bool {
        [self.x, self.y, self.width, self.height]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
    }

    pub fn fits_within(&self, dims: ImageDims) -> bool {
        self.is_well_formed()
            && self.x + self.width <= f64::from(dims.width)
            && self.y + self.height <= f64::from(dims.height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Self {
        ImageDims { width, height }
    }

    pub fn diagonal(&self) -> f64 {
        f64::from(self.width).hypot(f64::from(self.height))
    }
}

/// A node of the scene graph.
///
/// `sentiment` is kept private so every write goes through the clamp to
/// `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: String,
    pub label: String,
    pub category: Category,
    pub bbox: Option<BBox>,
    sentiment: f64,
    pub provenance: Provenance,
    pub grounded: bool,
}

impl Entity {
    pub fn perceived(id: impl Into<String>, label: &str, category: Category) -> Self {
        Entity {
            id: id.into(),
            label: normalize_label(label),
            category,
            bbox: None,
            sentiment: 0.0,
            provenance: Provenance::Perceived,
            grounded: false,
        }
    }

    /// A commonsense node added from the knowledge base.
    pub fn enriched(id: impl Into<String>, label: &str) -> Self {
        Entity {
            provenance: Provenance::Enriched,
            ..Entity::perceived(id, label, Category::Commonsense)
        }
    }

    pub fn with_bbox(mut self, bbox: BBox) -> Self {
        self.bbox = Some(bbox);
        self
    }

    pub fn with_sentiment(mut self, sentiment: f64) -> Self {
        self.set_sentiment(sentiment);
        self
    }

    pub fn sentiment(&self) -> f64 {
        self.sentiment
    }

    pub fn set_sentiment(&mut self, sentiment: f64) {
        self.sentiment = clamp_unit(sentiment);
    }

    pub fn is_perceived(&self) -> bool {
        self.provenance == Provenance::Perceived
    }
}

/// Clamps to `[-1, 1]`, mapping NaN to 0.
pub fn clamp_unit(value: f64) -> f64 {
    if value.is_nan() {
        0.0
    } else {
        value.clamp(-1.0, 1.0)
    }
}

/// A directed, predicated edge. Carries confidence, never sentiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub head: String,
    pub predicate: String,
    pub tail: String,
    pub confidence: f64,
    pub provenance: Provenance,
}

impl Relation {
    pub fn perceived(head: impl Into<String>, predicate: &str, tail: impl Into<String>) -> Self {
        Relation {
            head: head.into(),
            predicate: normalize_label(predicate),
            tail: tail.into(),
            confidence: 1.0,
            provenance: Provenance::Perceived,
        }
    }

    pub fn enriched(
        head: impl Into<String>,
        predicate: &str,
        tail: impl Into<String>,
        confidence: f64,
    ) -> Self {
        Relation {
            confidence,
            provenance: Provenance::Enriched,
            ..Relation::perceived(head, predicate, tail)
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    fn key(&self) -> (&str, &str, &str, Provenance) {
        (&self.head, &self.predicate, &self.tail, self.provenance)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("duplicate entity id {0}")]
    DuplicateEntity(String),
    #[error("empty entity id")]
    EmptyId,
    #[error("entity {0} has an empty label")]
    EmptyLabel(String),
    #[error("dangling endpoint {0}")]
    DanglingEndpoint(String),
    #[error("self-loop on {0}")]
    SelfLoop(String),
    #[error("relation {head} -> {tail} has an empty predicate")]
    EmptyPredicate { head: String, tail: String },
    #[error("relation {head} -[{predicate}]-> {tail} has confidence {confidence} outside (0, 1]")]
    InvalidConfidence {
        head: String,
        predicate: String,
        tail: String,
        confidence: f64,
    },
    #[error("duplicate relation {head} -[{predicate}]-> {tail}")]
    DuplicateRelation {
        head: String,
        predicate: String,
        tail: String,
    },
    #[error("bbox of {0} is malformed (negative or non-finite values)")]
    MalformedBBox(String),
    #[error("bbox of {0} lies outside the image")]
    BBoxOutsideImage(String),
    #[error("entity {0} has a bbox but the graph has no image dimensions")]
    MissingImageDims(String),
    #[error("image dimensions must be positive")]
    InvalidDims,
    #[error("unknown entity id {0}")]
    UnknownEntity(String),
    #[error("cannot merge {0} into itself")]
    SelfMerge(String),
}

/// `G = (R, E, θ)`: entities keyed by id plus an ordered relation list.
///
/// Immutable once built; every operation returns a new graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    frame_id: String,
    dims: Option<ImageDims>,
    entities: BTreeMap<String, Entity>,
    relations: Vec<Relation>,
}

/// Validates and assembles a scene graph. Labels and predicates are
/// normalized, sentiments clamped and relation order preserved.
pub fn build_graph(
    entities: impl IntoIterator<Item = Entity>,
    relations: impl IntoIterator<Item = Relation>,
    frame_id: impl Into<String>,
    dims: Option<ImageDims>,
) -> Result<SceneGraph, GraphError> {
    if let Some(d) = dims {
        if d.width == 0 || d.height == 0 {
            return Err(GraphError::InvalidDims);
        }
    }

    let mut by_id = BTreeMap::new();
    for mut entity in entities {
        if entity.id.is_empty() {
            return Err(GraphError::EmptyId);
        }
        entity.label = normalize_label(&entity.label);
        if entity.label.is_empty() {
            return Err(GraphError::EmptyLabel(entity.id));
        }
        let s = entity.sentiment;
        entity.set_sentiment(s);
        if let Some(bbox) = entity.bbox {
            if !bbox.is_well_formed() {
                return Err(GraphError::MalformedBBox(entity.id));
            }
            match dims {
                None => return Err(GraphError::MissingImageDims(entity.id)),
                Some(d) if !bbox.fits_within(d) => {
                    return Err(GraphError::BBoxOutsideImage(entity.id))
                }
                Some(_) => {}
            }
        }
        if by_id.contains_key(&entity.id) {
            return Err(GraphError::DuplicateEntity(entity.id));
        }
        by_id.insert(entity.id.clone(), entity);
    }

    let mut graph = SceneGraph {
        frame_id: frame_id.into(),
        dims,
        entities: by_id,
        relations: Vec::new(),
    };
    for mut relation in relations {
        relation.predicate = normalize_label(&relation.predicate);
        graph.check_relation(&relation)?;
        if !graph.push_relation(relation.clone()) {
            return Err(GraphError::DuplicateRelation {
                head: relation.head,
                predicate: relation.predicate,
                tail: relation.tail,
            });
        }
    }
    Ok(graph)
}

impl SceneGraph {
    pub fn empty(frame_id: impl Into<String>) -> Self {
        SceneGraph {
            frame_id: frame_id.into(),
            dims: None,
            entities: BTreeMap::new(),
            relations: Vec::new(),
        }
    }

    pub fn frame_id(&self) -> &str {
        &self.frame_id
    }

    pub fn dims(&self) -> Option<ImageDims> {
        self.dims
    }

    /// Entities in ascending id order.
    pub fn entities(&self) -> impl Iterator<Item = &Entity> + '_ {
        self.entities.values()
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entities.contains_key(id)
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn node_count(&self) -> usize {
        self.entities.len()
    }

    pub fn edge_count(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    /// The incidence lookup θ, generalized to a multimap: every relation
    /// from `head` to `tail`, in insertion order.
    pub fn relations_between(&self, head: &str, tail: &str) -> Result<Vec<&Relation>, GraphError> {
        for id in [head, tail] {
            if !self.contains(id) {
                return Err(GraphError::UnknownEntity(id.to_string()));
            }
        }
        if head == tail {
            return Err(GraphError::SelfLoop(head.to_string()));
        }
        Ok(self
            .relations
            .iter()
            .filter(|r| r.head == head && r.tail == tail)
            .collect())
    }

    /// Number of incident relations, counting both directions and every
    /// parallel edge.
    pub fn degree(&self, id: &str) -> usize {
        self.relations
            .iter()
            .filter(|r| r.head == id || r.tail == id)
            .count()
    }

    /// Undirected neighbourhood: `(neighbor id, edge confidence)` for every
    /// incident relation.
    pub fn neighbors<'a>(&'a self, id: &'a str) -> impl Iterator<Item = (&'a str, f64)> + 'a {
        self.relations.iter().filter_map(move |r| {
            if r.head == id {
                Some((r.tail.as_str(), r.confidence))
            } else if r.tail == id {
                Some((r.head.as_str(), r.confidence))
            } else {
                None
            }
        })
    }

    /// Rewires `absorbed` onto `survivor` and removes it. Rewritten
    /// self-loops and duplicates are dropped; the survivor keeps its own
    /// label, bbox and category and takes the more negative sentiment.
    pub fn merge_nodes(&self, survivor: &str, absorbed: &str) -> Result<SceneGraph, GraphError> {
        let mut merged = self.clone();
        merged.merge_in_place(survivor, absorbed)?;
        Ok(merged)
    }

    /// Σ S_n over every entity, unweighted.
    pub fn graph_sentiment(&self) -> f64 {
        self.entities.values().map(Entity::sentiment).sum()
    }

    /// Graphviz rendering; nodes ordered by id, edges in insertion order.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph {\n");
        for e in self.entities.values() {
            let s = e.sentiment();
            let color = if s < 0.0 {
                "red"
            } else if s > 0.0 {
                "green"
            } else {
                "gray"
            };
            // avoid "-0.000" for tiny negatives that round to zero
            let shown = format!("{:.3}", s);
            let shown = if shown == "-0.000" {
                "0.000".to_string()
            } else {
                shown
            };
            let _ = writeln!(
                out,
                "  \"{}\" [label=\"{} (S={})\", color={}];",
                dot_escape(&e.id),
                dot_escape(&e.label),
                shown,
                color
            );
        }
        for r in &self.relations {
            let style = match r.provenance {
                Provenance::Perceived => "solid",
                Provenance::Enriched => "dashed",
            };
            let _ = writeln!(
                out,
                "  \"{}\" -> \"{}\" [label=\"{}\", style={}];",
                dot_escape(&r.head),
                dot_escape(&r.tail),
                dot_escape(&r.predicate),
                style
            );
        }
        out.push_str("}\n");
        out
    }

    pub(crate) fn entity_mut(&mut self, id: &str) -> Option<&mut Entity> {
        self.entities.get_mut(id)
    }

    pub(crate) fn entities_mut(&mut self) -> impl Iterator<Item = &mut Entity> + '_ {
        self.entities.values_mut()
    }

    /// Inserts a fresh entity; the caller guarantees the id is unused.
    pub(crate) fn insert_entity(&mut self, entity: Entity) {
        debug_assert!(!self.entities.contains_key(&entity.id));
        self.entities.insert(entity.id.clone(), entity);
    }

    /// Picks an id derived from `base` that no entity uses yet.
    pub(crate) fn fresh_id(&self, base: &str) -> String {
        if !self.contains(base) {
            return base.to_string();
        }
        (2..)
            .map(|n| format!("{base}#{n}"))
            .find(|candidate| !self.contains(candidate))
            .expect("unbounded id space")
    }

    /// Appends a relation unless its quadruple already exists. Endpoints
    /// must already be validated.
    pub(crate) fn push_relation(&mut self, relation: Relation) -> bool {
        if self.relations.iter().any(|r| r.key() == relation.key()) {
            return false;
        }
        self.relations.push(relation);
        true
    }

    /// Validates and appends; `Ok(false)` on a duplicate quadruple.
    pub(crate) fn add_relation(&mut self, relation: Relation) -> Result<bool, GraphError> {
        self.check_relation(&relation)?;
        Ok(self.push_relation(relation))
    }

    pub(crate) fn merge_in_place(
        &mut self,
        survivor: &str,
        absorbed: &str,
    ) -> Result<(), GraphError> {
        for id in [survivor, absorbed] {
            if !self.contains(id) {
                return Err(GraphError::UnknownEntity(id.to_string()));
            }
        }
        if survivor == absorbed {
            return Err(GraphError::SelfMerge(survivor.to_string()));
        }
        let gone = self.entities.remove(absorbed).expect("checked above");
        let keep = self.entities.get_mut(survivor).expect("checked above");
        if gone.sentiment() < keep.sentiment() {
            keep.set_sentiment(gone.sentiment());
        }

        let old = std::mem::take(&mut self.relations);
        let mut seen = HashSet::new();
        for mut r in old {
            if r.head == absorbed {
                r.head = survivor.to_string();
            }
            if r.tail == absorbed {
                r.tail = survivor.to_string();
            }
            if r.head == r.tail {
                continue;
            }
            let key = (
                r.head.clone(),
                r.predicate.clone(),
                r.tail.clone(),
                r.provenance,
            );
            if seen.insert(key) {
                self.relations.push(r);
            }
        }
        Ok(())
    }

    fn check_relation(&self, r: &Relation) -> Result<(), GraphError> {
        for id in [&r.head, &r.tail] {
            if !self.contains(id) {
                return Err(GraphError::DanglingEndpoint(id.clone()));
            }
        }
        if r.head == r.tail {
            return Err(GraphError::SelfLoop(r.head.clone()));
        }
        if r.predicate.is_empty() {
            return Err(GraphError::EmptyPredicate {
                head: r.head.clone(),
                tail: r.tail.clone(),
            });
        }
        if !(r.confidence > 0.0 && r.confidence <= 1.0) {
            return Err(GraphError::InvalidConfidence {
                head: r.head.clone(),
                predicate: r.predicate.clone(),
                tail: r.tail.clone(),
                confidence: r.confidence,
            });
        }
        Ok(())
    }

    /// Ids of perceived entities, ascending.
    pub fn perceived_ids(&self) -> Vec<String> {
        self.entities
            .values()
            .filter(|e| e.is_perceived())
            .map(|e| e.id.clone())
            .collect()
    }

    /// Distinct labels of perceived entities.
    pub fn perceived_labels(&self) -> BTreeSet<String> {
        self.entities
            .values()
            .filter(|e| e.is_perceived())
            .map(|e| e.label.clone())
            .collect()
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
