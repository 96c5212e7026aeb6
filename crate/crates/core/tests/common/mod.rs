#![allow(dead_code)]

use std::collections::BTreeSet;

use assist_core::{
    build_graph, BBox, Category, ConnotationLexicon, Entity, ImageDims, KnowledgeBase, Relation,
    RelationKind, SceneGraph, Triple,
};
use proptest::prelude::*;

pub const WORDS: [&str; 16] = [
    "person",
    "child",
    "knife",
    "tomato",
    "vegetable",
    "heat",
    "oven",
    "hand",
    "glove",
    "burn",
    "protect",
    "cut",
    "wood",
    "axe",
    "water",
    "cool",
];

pub const PREDICATES: [&str; 4] = ["holding", "near", "on", "looking at"];

pub const DIMS: ImageDims = ImageDims {
    width: 640,
    height: 480,
};

pub fn label() -> impl Strategy<Value = String> {
    prop_oneof![
        3 => prop::sample::select(&WORDS[..]).prop_map(str::to_string),
        1 => (prop::sample::select(&WORDS[..]), prop::sample::select(&WORDS[..]))
            .prop_map(|(a, b)| format!("{a} {b}")),
    ]
}

pub fn category() -> impl Strategy<Value = Category> {
    prop::sample::select(vec![
        Category::Person,
        Category::Object,
        Category::Place,
        Category::Attribute,
    ])
}

pub fn bbox() -> impl Strategy<Value = BBox> {
    (0.0..600.0f64, 0.0..440.0f64)
        .prop_flat_map(|(x, y)| (Just(x), Just(y), 1.0..(640.0 - x), 1.0..(480.0 - y)))
        .prop_map(|(x, y, w, h)| BBox::new(x, y, w, h))
}

pub fn sentiment() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 3 => -1.0..=1.0f64]
}

fn entity(index: usize) -> impl Strategy<Value = Entity> {
    (
        label(),
        category(),
        prop::option::weighted(0.7, bbox()),
        sentiment(),
    )
        .prop_map(move |(l, c, b, s)| {
            let mut e = Entity::perceived(format!("n{index}"), &l, c).with_sentiment(s);
            e.bbox = b;
            e
        })
}

/// Random valid graphs: `1..=max_nodes` entities, unique relation keys,
/// confidences in (0, 1].
pub fn graph(max_nodes: usize) -> impl Strategy<Value = SceneGraph> {
    (1..=max_nodes)
        .prop_flat_map(|n| {
            let entities: Vec<_> = (0..n).map(entity).collect();
            let edges =
                prop::collection::vec((0..n, 0..n, 0..PREDICATES.len(), 0.05..=1.0f64), 0..=2 * n);
            (entities, edges)
        })
        .prop_map(|(entities, edges)| {
            let mut seen = BTreeSet::new();
            let relations: Vec<Relation> = edges
                .into_iter()
                .filter(|&(h, t, p, _)| h != t && seen.insert((h, t, p)))
                .map(|(h, t, p, c)| {
                    Relation::perceived(format!("n{h}"), PREDICATES[p], format!("n{t}"))
                        .with_confidence(c)
                })
                .collect();
            build_graph(entities, relations, "random", Some(DIMS))
                .expect("generator yields valid graphs")
        })
}

pub fn relation_kind() -> impl Strategy<Value = RelationKind> {
    prop::sample::select(RelationKind::ALL.to_vec())
}

pub fn triple() -> impl Strategy<Value = Triple> {
    (label(), relation_kind(), label(), 1u32..=20)
        .prop_map(|(h, r, t, w)| Triple::new(&h, r, &t, f64::from(w) / 20.0))
}

pub fn kb(max_triples: usize) -> impl Strategy<Value = KnowledgeBase> {
    prop::collection::vec(triple(), 0..=max_triples)
        .prop_map(|ts| KnowledgeBase::from_triples(ts).expect("generated triples are valid"))
}

pub fn lexicon() -> impl Strategy<Value = ConnotationLexicon> {
    prop::collection::btree_map(
        prop::sample::select(&WORDS[..]),
        -1.0..=1.0f64,
        0..WORDS.len(),
    )
    .prop_map(|m| ConnotationLexicon::from_entries(m).expect("generated entries are valid"))
}

/// Same graph with every sentiment replaced.
pub fn with_sentiments(graph: &SceneGraph, values: &[f64]) -> SceneGraph {
    let entities: Vec<Entity> = graph
        .entities()
        .zip(values)
        .map(|(e, &s)| {
            let mut e = e.clone();
            e.set_sentiment(s);
            e
        })
        .collect();
    build_graph(
        entities,
        graph.relations().to_vec(),
        graph.frame_id(),
        graph.dims(),
    )
    .unwrap()
}
