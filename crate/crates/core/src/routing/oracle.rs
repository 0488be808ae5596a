//! Exhaustive enumeration of simple paths and mode assignments.
//!
//! Deliberately shares nothing with the searches except the edge arithmetic
//! and the scoring function: it walks every simple path by DFS, expands every
//! mode assignment, and filters afterwards.

use super::{compare_routes, dominates, CriteriaWeights, EdgeAttrs, Hop, LogisticsGraph, Mode, Route, RoutingError};
use crate::ids::NodeId;

/// Every simple src→dst path over open edges, as node lists.
pub fn simple_paths(graph: &LogisticsGraph, src: &NodeId, dst: &NodeId) -> Vec<Vec<EdgeAttrs>> {
    let mut out = Vec::new();
    let mut stack = vec![src.clone()];
    let mut edges = Vec::new();
    dfs(graph, dst, &mut stack, &mut edges, &mut out);
    out
}

fn dfs(
    graph: &LogisticsGraph,
    dst: &NodeId,
    stack: &mut Vec<NodeId>,
    edges: &mut Vec<EdgeAttrs>,
    out: &mut Vec<Vec<EdgeAttrs>>,
) {
    let at = stack.last().cloned().expect("stack seeded with src");
    if &at == dst {
        out.push(edges.clone());
        return;
    }
    for e in graph.out_edges(&at) {
        if !e.open || stack.contains(&e.to) {
            continue;
        }
        stack.push(e.to.clone());
        edges.push(e.clone());
        dfs(graph, dst, stack, edges, out);
        edges.pop();
        stack.pop();
    }
}

/// All (path, mode assignment) routes.
pub fn enumerate_routes(graph: &LogisticsGraph, src: &NodeId, dst: &NodeId, allow_expedite: bool) -> Vec<Route> {
    let mut routes = Vec::new();
    for path in simple_paths(graph, src, dst) {
        let n = path.len();
        let combos: u64 = if allow_expedite { 1 << n } else { 1 };
        for mask in 0..combos {
            let hops = path
                .iter()
                .enumerate()
                .map(|(i, e)| Hop {
                    edge: e.clone(),
                    mode: if mask >> i & 1 == 1 { Mode::Expedited } else { Mode::Normal },
                })
                .collect();
            routes.push(Route::from_hops(hops));
        }
    }
    routes
}

fn precheck(graph: &LogisticsGraph, src: &NodeId, dst: &NodeId, bound: usize) -> Result<(), RoutingError> {
    if graph.node_count() > bound {
        return Err(RoutingError::InstanceTooLarge {
            nodes: graph.node_count(),
            bound,
        });
    }
    for n in [src, dst] {
        if !graph.contains(n) {
            return Err(RoutingError::UnknownNode(n.clone()));
        }
    }
    if src == dst {
        return Err(RoutingError::SameEndpoints(src.clone()));
    }
    Ok(())
}

/// Brute-force optimum under the router's total order.
pub fn best_route(
    graph: &LogisticsGraph,
    src: &NodeId,
    dst: &NodeId,
    weights: &CriteriaWeights,
    allow_expedite: bool,
    bound: usize,
) -> Result<Route, RoutingError> {
    precheck(graph, src, dst, bound)?;
    enumerate_routes(graph, src, dst, allow_expedite)
        .into_iter()
        .min_by(|a, b| compare_routes(a, b, weights))
        .ok_or_else(|| RoutingError::NoPath {
            src: src.clone(),
            dst: dst.clone(),
        })
}

/// Pairwise domination filter over the full enumeration, sorted by score.
pub fn front(
    graph: &LogisticsGraph,
    src: &NodeId,
    dst: &NodeId,
    weights: &CriteriaWeights,
    allow_expedite: bool,
    bound: usize,
) -> Result<Vec<Route>, RoutingError> {
    precheck(graph, src, dst, bound)?;
    let all = enumerate_routes(graph, src, dst, allow_expedite);
    if all.is_empty() {
        return Err(RoutingError::NoPath {
            src: src.clone(),
            dst: dst.clone(),
        });
    }
    let mut keep: Vec<Route> = all
        .iter()
        .filter(|r| !all.iter().any(|o| dominates(&o.criteria(), &r.criteria())))
        .cloned()
        .collect();
    keep.sort_by(|a, b| compare_routes(a, b, weights));
    Ok(keep)
}
