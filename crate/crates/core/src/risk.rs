//! Node sentiment (lexicon polarity with spatial weighting), damped
//! propagation, risk pooling and the safe/unsafe decision.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::graph::{clamp_unit, Category, SceneGraph};
use crate::knowledge::ConnotationLexicon;
use crate::ParamError;

/// Labels that put the scene in child context.
pub const CHILD_LABELS: [&str; 5] = ["child", "baby", "kid", "infant", "toddler"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskParams {
    /// Propagation damping in `[0, 1)`.
    pub alpha: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Spatial weighting gain.
    pub beta: f64,
    pub threshold: f64,
    pub child_adjustment: f64,
    pub threshold_floor: f64,
}

impl Default for RiskParams {
    fn default() -> Self {
        RiskParams {
            alpha: 0.3,
            tol: 1e-6,
            max_iters: 50,
            beta: 1.0,
            threshold: 0.5,
            child_adjustment: 0.15,
            threshold_floor: 0.05,
        }
    }
}

impl RiskParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(ParamError::new("alpha", "must lie in [0, 1)"));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(ParamError::new("tol", "must be positive"));
        }
        if self.max_iters < 1 {
            return Err(ParamError::new("max_iters", "must be at least 1"));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(ParamError::new("beta", "must be a finite value >= 0"));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(ParamError::new("threshold", "must lie in (0, 1]"));
        }
        if !self.child_adjustment.is_finite() || self.child_adjustment < 0.0 {
            return Err(ParamError::new(
                "child_adjustment",
                "must be a finite value >= 0",
            ));
        }
        if self.threshold_floor.is_nan() || self.threshold_floor <= 0.0 {
            return Err(ParamError::new("threshold_floor", "must be positive"));
        }
        if self.threshold_floor > self.threshold {
            return Err(ParamError::new(
                "threshold_floor",
                "must not exceed threshold",
            ));
        }
        Ok(())
    }
}

/// Per-node record of the sentiment assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeSentiment {
    pub base_polarity: f64,
    pub proximity: f64,
    pub spatial_factor: f64,
    pub assigned: f64,
}

#[derive(Debug, Clone)]
pub struct SentimentPass {
    pub graph: SceneGraph,
    pub nodes: BTreeMap<String, NodeSentiment>,
}

/// Proximity of every entity to the nearest person, in `[0, 1]`.
///
/// Entities with a bbox use `1 − d / diagonal` for the distance `d` between
/// bbox centres. Entities without one inherit the largest proximity among
/// neighbours that have a bbox. Missing people or image dimensions give 0.
pub fn proximities(graph: &SceneGraph) -> BTreeMap<String, f64> {
    let people: Vec<(f64, f64)> = graph
        .entities()
        .filter(|e| e.category == Category::Person)
        .filter_map(|e| e.bbox.map(|b| b.center()))
        .collect();
    let diagonal = graph.dims().map(|d| d.diagonal()).unwrap_or(0.0);

    let direct: BTreeMap<&str, f64> = graph
        .entities()
        .filter_map(|e| {
            let bbox = e.bbox?;
            let (cx, cy) = bbox.center();
            let nearest = people
                .iter()
                .map(|(px, py)| (cx - px).hypot(cy - py))
                .reduce(f64::min);
            let p = match nearest {
                Some(d) if diagonal > 0.0 => (1.0 - d / diagonal).clamp(0.0, 1.0),
                _ => 0.0,
            };
            Some((e.id.as_str(), p))
        })
        .collect();

    graph
        .entities()
        .map(|e| {
            let p = match direct.get(e.id.as_str()) {
                Some(&p) => p,
                None => graph
                    .neighbors(&e.id)
                    .filter_map(|(n, _)| direct.get(n).copied())
                    .fold(0.0, f64::max),
            };
            (e.id.clone(), p)
        })
        .collect()
}

/// Lexicon polarity per node, amplified by `1 + beta × proximity` for
/// negative nodes, clamped to `[-1, 1]`.
pub fn assign_sentiment(
    graph: &SceneGraph,
    lexicon: &ConnotationLexicon,
    params: &RiskParams,
) -> SentimentPass {
    let prox = proximities(graph);
    let mut out = graph.clone();
    let mut nodes = BTreeMap::new();
    for e in out.entities_mut() {
        let base = lexicon.polarity(&e.label);
        let proximity = prox.get(&e.id).copied().unwrap_or(0.0);
        let factor = if base < 0.0 {
            1.0 + params.beta * proximity
        } else {
            1.0
        };
        e.set_sentiment(base * factor);
        nodes.insert(
            e.id.clone(),
            NodeSentiment {
                base_polarity: base,
                proximity,
                spatial_factor: factor,
                assigned: e.sentiment(),
            },
        );
    }
    SentimentPass { graph: out, nodes }
}

#[derive(Debug, Clone)]
pub struct Propagation {
    pub graph: SceneGraph,
    pub iterations_used: usize,
}

/// Damped averaging anchored to the current sentiments:
/// `S ← (1−α)·base + α·(Σ c·S_m / Σ c)` over undirected neighbourhoods,
/// updated synchronously. Isolated nodes keep their base value.
pub fn propagate(graph: &SceneGraph, params: &RiskParams) -> Propagation {
    let ids: Vec<&str> = graph.entities().map(|e| e.id.as_str()).collect();
    let index: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let base: Vec<f64> = graph.entities().map(|e| e.sentiment()).collect();

    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ids.len()];
    for r in graph.relations() {
        let (h, t) = (index[r.head.as_str()], index[r.tail.as_str()]);
        adjacency[h].push((t, r.confidence));
        adjacency[t].push((h, r.confidence));
    }

    let alpha = params.alpha;
    let mut current = base.clone();
    let mut next = vec![0.0; ids.len()];
    let mut iterations = 0;
    while iterations < params.max_iters.max(1) {
        iterations += 1;
        let mut delta: f64 = 0.0;
        for (n, neigh) in adjacency.iter().enumerate() {
            let total: f64 = neigh.iter().map(|(_, c)| c).sum();
            next[n] = if neigh.is_empty() || total <= 0.0 {
                base[n]
            } else {
                let mean = neigh.iter().map(|&(m, c)| c * current[m]).sum::<f64>() / total;
                clamp_unit((1.0 - alpha) * base[n] + alpha * mean)
            };
            delta = delta.max((next[n] - current[n]).abs());
        }
        std::mem::swap(&mut current, &mut next);
        if delta < params.tol {
            break;
        }
    }

    let mut out = graph.clone();
    for (e, s) in out.entities_mut().zip(current) {
        e.set_sentiment(s);
    }
    Propagation {
        graph: out,
        iterations_used: iterations,
    }
}

/// `1 + ln(1 + degree)`.
pub fn pooling_weight(graph: &SceneGraph, id: &str) -> f64 {
    1.0 + (graph.degree(id) as f64).ln_1p()
}

/// Degree-weighted negative mass over total weight, in `[0, 1]`.
pub fn pool_risk(graph: &SceneGraph) -> f64 {
    let mut negative = 0.0;
    let mut total = 0.0;
    for e in graph.entities() {
        let w = pooling_weight(graph, &e.id);
        total += w;
        if e.sentiment() < 0.0 {
            negative += -e.sentiment() * w;
        }
    }
    if total > 0.0 {
        (negative / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Safe,
    Unsafe,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Safe => "safe",
            Verdict::Unsafe => "unsafe",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contribution {
    pub id: String,
    pub label: String,
    pub base_polarity: f64,
    pub spatial_factor: f64,
    pub sentiment: f64,
    pub pooling_weight: f64,
}

/// What the sentiment passes recorded, for filling contributions.
#[derive(Debug, Clone, Default)]
pub struct SentimentTrace {
    pub nodes: BTreeMap<String, NodeSentiment>,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskAssessment {
    pub risk: f64,
    pub effective_threshold: f64,
    pub verdict: Verdict,
    pub child_context: bool,
    pub contributions: Vec<Contribution>,
    pub iterations_used: usize,
}

pub fn child_context(graph: &SceneGraph, child_present: bool) -> bool {
    child_present
        || graph
            .entities()
            .any(|e| e.is_perceived() && CHILD_LABELS.contains(&e.label.as_str()))
}

/// `max(floor, threshold − adjustment·[child])`.
pub fn effective_threshold(params: &RiskParams, child: bool) -> f64 {
    let lowered = if child {
        params.threshold - params.child_adjustment
    } else {
        params.threshold
    };
    params.threshold_floor.max(lowered)
}

/// Unsafe exactly when `risk` exceeds the effective threshold.
pub fn decide(
    graph: &SceneGraph,
    risk: f64,
    params: &RiskParams,
    child_present: bool,
    trace: &SentimentTrace,
) -> RiskAssessment {
    let child = child_context(graph, child_present);
    let tau = effective_threshold(params, child);
    let contributions = graph
        .entities()
        .map(|e| {
            let rec = trace.nodes.get(&e.id);
            Contribution {
                id: e.id.clone(),
                label: e.label.clone(),
                base_polarity: rec.map_or(e.sentiment(), |r| r.base_polarity),
                spatial_factor: rec.map_or(1.0, |r| r.spatial_factor),
                sentiment: e.sentiment(),
                pooling_weight: pooling_weight(graph, &e.id),
            }
        })
        .collect();
    RiskAssessment {
        risk,
        effective_threshold: tau,
        verdict: if risk > tau {
            Verdict::Unsafe
        } else {
            Verdict::Safe
        },
        child_context: child,
        contributions,
        iterations_used: trace.iterations_used,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, BBox, Entity, ImageDims, Relation};

    fn lexicon() -> ConnotationLexicon {
        ConnotationLexicon::from_entries([("heat", -0.4), ("glove", 0.4), ("hurt", -0.8)]).unwrap()
    }

    #[test]
    fn bboxless_node_inherits_neighbor_proximity() {
        // image diagonal 800; hand centre 160 px from the person centre
        let g = build_graph(
            [
                Entity::perceived("p", "person", Category::Person)
                    .with_bbox(BBox::new(150.0, 190.0, 100.0, 100.0)),
                Entity::perceived("h", "hand", Category::Object)
                    .with_bbox(BBox::new(340.0, 220.0, 40.0, 40.0)),
                Entity::enriched("kb:heat", "heat"),
            ],
            [Relation::enriched("kb:heat", "near", "h", 1.0)],
            "f",
            Some(ImageDims::new(640, 480)),
        )
        .unwrap();
        let pass = assign_sentiment(&g, &lexicon(), &RiskParams::default());
        let heat = pass.nodes["kb:heat"];
        assert!((heat.proximity - 0.8).abs() < 1e-12);
        assert!((heat.assigned - -0.72).abs() < 1e-12);
        assert_eq!(pass.nodes["p"].proximity, 1.0);
    }

    #[test]
    fn positive_nodes_get_no_boost() {
        let g = build_graph(
            [
                Entity::perceived("p", "person", Category::Person)
                    .with_bbox(BBox::new(0.0, 0.0, 10.0, 10.0)),
                Entity::perceived("g", "glove", Category::Object)
                    .with_bbox(BBox::new(0.0, 0.0, 10.0, 10.0)),
            ],
            [],
            "f",
            Some(ImageDims::new(100, 100)),
        )
        .unwrap();
        let pass = assign_sentiment(&g, &lexicon(), &RiskParams::default());
        assert_eq!(pass.nodes["g"].spatial_factor, 1.0);
        assert_eq!(pass.graph.entity("g").unwrap().sentiment(), 0.4);
    }

    #[test]
    fn unknown_labels_are_neutral() {
        let g = build_graph(
            [
                Entity::perceived("a", "lamp", Category::Object),
                Entity::perceived("b", "desk", Category::Object),
            ],
            [Relation::perceived("a", "on", "b")],
            "f",
            None,
        )
        .unwrap();
        let pass = assign_sentiment(&g, &lexicon(), &RiskParams::default());
        assert!(pass.graph.entities().all(|e| e.sentiment() == 0.0));
    }

    #[test]
    fn missing_person_means_no_boost() {
        let g = build_graph(
            [Entity::perceived("a", "heat", Category::Object)
                .with_bbox(BBox::new(0.0, 0.0, 5.0, 5.0))],
            [],
            "f",
            Some(ImageDims::new(10, 10)),
        )
        .unwrap();
        let pass = assign_sentiment(&g, &lexicon(), &RiskParams::default());
        assert_eq!(pass.nodes["a"].assigned, -0.4);
    }

    #[test]
    fn strong_boost_is_clamped() {
        let g = build_graph(
            [
                Entity::perceived("p", "person", Category::Person)
                    .with_bbox(BBox::new(0.0, 0.0, 10.0, 10.0)),
                Entity::perceived("x", "hurt hurt", Category::Object)
                    .with_bbox(BBox::new(0.0, 0.0, 10.0, 10.0)),
            ],
            [],
            "f",
            Some(ImageDims::new(100, 100)),
        )
        .unwrap();
        let pass = assign_sentiment(
            &g,
            &lexicon(),
            &RiskParams {
                beta: 2.0,
                ..Default::default()
            },
        );
        assert_eq!(pass.nodes["x"].assigned, -1.0);
    }

    fn pair(s1: f64, s2: f64) -> SceneGraph {
        build_graph(
            [
                Entity::perceived("a", "x", Category::Object).with_sentiment(s1),
                Entity::perceived("b", "y", Category::Object).with_sentiment(s2),
            ],
            [Relation::perceived("a", "r", "b")],
            "f",
            None,
        )
        .unwrap()
    }

    #[test]
    fn zero_damping_returns_base_in_one_iteration() {
        let g = pair(-0.8, 0.3);
        let p = propagate(
            &g,
            &RiskParams {
                alpha: 0.0,
                ..Default::default()
            },
        );
        assert_eq!(p.iterations_used, 1);
        assert_eq!(p.graph, g);
    }

    #[test]
    fn two_node_fixed_point() {
        // S1 = 0.7·(−0.8) + 0.3·S2, S2 = 0.3·S1  ⇒  S1 = −0.56 / 0.91
        let p = propagate(&pair(-0.8, 0.0), &RiskParams::default());
        let s1 = p.graph.entity("a").unwrap().sentiment();
        let s2 = p.graph.entity("b").unwrap().sentiment();
        let expect1 = -0.56 / 0.91;
        assert!((s1 - expect1).abs() < 1e-6, "{s1}");
        assert!((s2 - 0.3 * expect1).abs() < 1e-6, "{s2}");
        assert!((s1 - -0.615).abs() < 1e-3 && (s2 - -0.185).abs() < 1e-3);
    }

    #[test]
    fn isolated_nodes_keep_base() {
        let g = build_graph(
            [Entity::perceived("a", "x", Category::Object).with_sentiment(-0.5)],
            [],
            "f",
            None,
        )
        .unwrap();
        let p = propagate(&g, &RiskParams::default());
        assert_eq!(p.graph.entity("a").unwrap().sentiment(), -0.5);
    }

    #[test]
    fn max_iters_caps_work() {
        let p = propagate(
            &pair(-0.8, 0.0),
            &RiskParams {
                alpha: 0.9,
                max_iters: 3,
                ..Default::default()
            },
        );
        assert_eq!(p.iterations_used, 3);
    }

    #[test]
    fn pooling_edge_cases() {
        assert_eq!(pool_risk(&SceneGraph::empty("f")), 0.0);
        assert_eq!(pool_risk(&pair(0.5, 0.0)), 0.0);
        let single = build_graph(
            [Entity::perceived("a", "x", Category::Object).with_sentiment(-1.0)],
            [],
            "f",
            None,
        )
        .unwrap();
        assert_eq!(pool_risk(&single), 1.0);
        // two nodes of degree 1 share equal weight
        assert!((pool_risk(&pair(-0.6, 0.2)) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn threshold_and_child_context() {
        let g = SceneGraph::empty("f");
        let p = RiskParams::default();
        let t = SentimentTrace::default();
        assert_eq!(decide(&g, 0.30, &p, false, &t).verdict, Verdict::Safe);
        let with_child = decide(&g, 0.30, &p, true, &t);
        assert!((with_child.effective_threshold - 0.35).abs() < 1e-12);
        assert_eq!(with_child.verdict, Verdict::Safe);
        assert_eq!(decide(&g, 0.40, &p, true, &t).verdict, Verdict::Unsafe);
        assert_eq!(
            decide(
                &g,
                0.0,
                &RiskParams {
                    threshold: 0.05,
                    ..p
                },
                true,
                &t
            )
            .verdict,
            Verdict::Safe
        );
        // the floor bounds the lowered threshold
        let low = RiskParams {
            threshold: 0.1,
            ..p
        };
        assert_eq!(decide(&g, 0.0, &low, true, &t).effective_threshold, 0.05);
    }

    #[test]
    fn child_label_in_scene_triggers_context() {
        let g = build_graph(
            [Entity::perceived("c", "Toddler", Category::Person)],
            [],
            "f",
            None,
        )
        .unwrap();
        let a = decide(
            &g,
            0.4,
            &RiskParams::default(),
            false,
            &SentimentTrace::default(),
        );
        assert!(a.child_context);
        assert_eq!(a.verdict, Verdict::Unsafe);
    }

    #[test]
    fn param_validation() {
        assert!(RiskParams::default().validate().is_ok());
        assert!(RiskParams {
            alpha: 1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(RiskParams {
            threshold: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(RiskParams {
            threshold_floor: 0.6,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
