mod common;

use assist_core::risk::{effective_threshold, pooling_weight, proximities};
use assist_core::{
    assign_sentiment, build_graph, pool_risk, propagate, BBox, ImageDims, RiskParams, SceneGraph,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Fixed point of the damped averaging, by LU on `(I − αW) S = (1 − α) b`.
fn direct_solve(graph: &SceneGraph, alpha: f64) -> Vec<f64> {
    let ids: Vec<&str> = graph.entities().map(|e| e.id.as_str()).collect();
    let n = ids.len();
    let mut a = DMatrix::<f64>::identity(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for (i, id) in ids.iter().enumerate() {
        let base = graph.entity(id).unwrap().sentiment();
        let neigh: Vec<(&str, f64)> = graph.neighbors(id).collect();
        let total: f64 = neigh.iter().map(|(_, c)| c).sum();
        if neigh.is_empty() {
            b[i] = base;
            continue;
        }
        b[i] = (1.0 - alpha) * base;
        for (m, c) in neigh {
            let j = ids.iter().position(|x| *x == m).unwrap();
            a[(i, j)] -= alpha * c / total;
        }
    }
    a.lu()
        .solve(&b)
        .expect("I - αW is nonsingular for α < 1")
        .iter()
        .copied()
        .collect()
}

/// Iterations after which the sup-norm step must be below `tol`.
fn contraction_bound(alpha: f64, tol: f64, max_iters: usize) -> usize {
    if alpha == 0.0 {
        return 1;
    }
    let k = ((tol / 2.0).ln() / alpha.ln()).floor() as usize + 1;
    k.min(max_iters)
}

fn sentiments(graph: &SceneGraph) -> Vec<f64> {
    graph.entities().map(|e| e.sentiment()).collect()
}

fn scaled(graph: &SceneGraph, k: u32) -> SceneGraph {
    let f = f64::from(k);
    let entities: Vec<_> = graph
        .entities()
        .map(|e| {
            let mut e = e.clone();
            e.bbox = e
                .bbox
                .map(|b| BBox::new(b.x * f, b.y * f, b.width * f, b.height * f));
            e
        })
        .collect();
    let dims = graph
        .dims()
        .map(|d| ImageDims::new(d.width * k, d.height * k));
    build_graph(entities, graph.relations().to_vec(), graph.frame_id(), dims).unwrap()
}

proptest! {
    #[test]
    fn propagation_reaches_the_linear_fixed_point(g in common::graph(8), alpha in 0.0..0.9f64) {
        let params = RiskParams { alpha, tol: 1e-7, max_iters: 10_000, ..RiskParams::default() };
        let run = propagate(&g, &params);
        let exact = direct_solve(&g, alpha);
        for (got, want) in sentiments(&run.graph).iter().zip(&exact) {
            prop_assert!((got - want).abs() < 1e-5, "{} vs {}", got, want);
        }
        prop_assert!(run.iterations_used <= contraction_bound(alpha, params.tol, params.max_iters));
    }

    #[test]
    fn propagation_steps_shrink(g in common::graph(8), alpha in 0.0..0.95f64) {
        let mut prev = sentiments(&g);
        let mut last_step = f64::INFINITY;
        for k in 1..=8 {
            let params = RiskParams { alpha, tol: f64::MIN_POSITIVE, max_iters: k, ..RiskParams::default() };
            let now = sentiments(&propagate(&g, &params).graph);
            let step = prev.iter().zip(&now).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(step <= last_step + 1e-12);
            prop_assert!(now.iter().all(|s| (-1.0..=1.0).contains(s)));
            last_step = step;
            prev = now;
        }
    }

    #[test]
    fn risk_is_bounded_and_monotone(g in common::graph(8), pick in 0usize..8, drop in 0.0..=2.0f64) {
        let risk = pool_risk(&g);
        prop_assert!((0.0..=1.0).contains(&risk));
        let mut values = sentiments(&g);
        let i = pick % values.len();
        values[i] = (values[i] - drop).max(-1.0);
        let worse = common::with_sentiments(&g, &values);
        prop_assert!(pool_risk(&worse) >= risk - 1e-12);
    }

    #[test]
    fn pooling_weight_grows_with_degree(g in common::graph(8)) {
        for e in g.entities() {
            let w = pooling_weight(&g, &e.id);
            prop_assert!((w - (1.0 + (g.degree(&e.id) as f64).ln_1p())).abs() < 1e-12);
            prop_assert!(w >= 1.0);
        }
    }

    #[test]
    fn child_context_never_raises_the_threshold(
        threshold in 0.05..=1.0f64,
        adjustment in 0.0..=1.0f64,
        floor_frac in 0.01..=1.0f64,
    ) {
        let params = RiskParams {
            threshold,
            child_adjustment: adjustment,
            threshold_floor: threshold * floor_frac,
            ..RiskParams::default()
        };
        let (adult, child) = (effective_threshold(&params, false), effective_threshold(&params, true));
        prop_assert!(child <= adult);
        prop_assert!(child >= params.threshold_floor);
    }

    #[test]
    fn proximity_is_scale_free(g in common::graph(8), k in 2u32..6, lex in common::lexicon()) {
        let big = scaled(&g, k);
        let (p1, p2) = (proximities(&g), proximities(&big));
        for (id, p) in &p1 {
            prop_assert!((p - p2[id]).abs() < 1e-9);
        }
        let params = RiskParams::default();
        let (a, b) = (assign_sentiment(&g, &lex, &params), assign_sentiment(&big, &lex, &params));
        for (x, y) in sentiments(&a.graph).iter().zip(sentiments(&b.graph)) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }
}
