use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use super::{CriteriaWeights, EdgeAttrs, Hop, LogisticsGraph, Mode, Route, RoutingError};
use crate::ids::NodeId;

struct Label {
    score: f64,
    path: Vec<NodeId>,
    hops: Vec<Hop>,
}

impl Label {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then(self.hops.len().cmp(&other.hops.len()))
            .then_with(|| self.path.cmp(&other.path))
    }
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

/// Cheaper of the two modes for one hop; normal wins ties.
pub(crate) fn best_mode(edge: &EdgeAttrs, weights: &CriteriaWeights, allow_expedite: bool) -> (Mode, f64) {
    let normal = weights.hop_score(edge, Mode::Normal);
    if allow_expedite {
        let fast = weights.hop_score(edge, Mode::Expedited);
        if fast < normal {
            return (Mode::Expedited, fast);
        }
    }
    (Mode::Normal, normal)
}

/// Minimum weighted-sum route over open edges.
///
/// Labels are settled in (score, hop count, node sequence) order, so the first
/// label to settle `dst` is the tie-broken optimum among simple paths.
pub fn shortest_path_scalarized(
    graph: &LogisticsGraph,
    src: &NodeId,
    dst: &NodeId,
    weights: &CriteriaWeights,
    allow_expedite: bool,
) -> Result<Route, RoutingError> {
    weights.validate()?;
    for n in [src, dst] {
        if !graph.contains(n) {
            return Err(RoutingError::UnknownNode(n.clone()));
        }
    }
    if src == dst {
        return Err(RoutingError::SameEndpoints(src.clone()));
    }

    let mut settled: BTreeSet<NodeId> = BTreeSet::new();
    let mut heap = BinaryHeap::new();
    heap.push(Label {
        score: 0.0,
        path: vec![src.clone()],
        hops: Vec::new(),
    });

    while let Some(label) = heap.pop() {
        let at = label.path.last().expect("label path never empty").clone();
        if !settled.insert(at.clone()) {
            continue;
        }
        if &at == dst {
            return Ok(Route::from_hops(label.hops));
        }
        for edge in graph.open_out_edges(&at) {
            if settled.contains(&edge.to) {
                continue;
            }
            let (mode, hop) = best_mode(edge, weights, allow_expedite);
            let mut path = label.path.clone();
            path.push(edge.to.clone());
            let mut hops = label.hops.clone();
            hops.push(Hop {
                edge: edge.clone(),
                mode,
            });
            heap.push(Label {
                score: label.score + hop,
                path,
                hops,
            });
        }
    }
    Err(RoutingError::NoPath {
        src: src.clone(),
        dst: dst.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::{route_cost, Disruption, EdgeRef, NodeAttrs, NodeKind};

    fn nodes(ids: &[&str]) -> Vec<NodeAttrs> {
        ids.iter()
            .map(|id| NodeAttrs {
                node_id: (*id).into(),
                kind: NodeKind::Hub,
                accepts_dangerous: true,
                reefer_plugs: 0,
                is_container_depot: false,
            })
            .collect()
    }

    #[test]
    fn line_graph_single_route() {
        let g = LogisticsGraph::from_parts(
            nodes(&["A", "B", "C"]),
            vec![EdgeAttrs::new("A", "B", 1.0, 1.0, 1.0), EdgeAttrs::new("B", "C", 1.0, 1.0, 1.0)],
        )
        .unwrap();
        let r = shortest_path_scalarized(&g, &"A".into(), &"C".into(), &CriteriaWeights::default(), false).unwrap();
        assert_eq!(r.nodes(), vec![NodeId::from("A"), "B".into(), "C".into()]);
        assert_eq!(r.total_time, 2.0);
    }

    #[test]
    fn same_endpoints_and_unknown_nodes() {
        let g = LogisticsGraph::from_parts(nodes(&["A"]), vec![]).unwrap();
        let w = CriteriaWeights::default();
        assert!(matches!(
            shortest_path_scalarized(&g, &"A".into(), &"A".into(), &w, false),
            Err(RoutingError::SameEndpoints(_))
        ));
        assert!(matches!(
            shortest_path_scalarized(&g, &"A".into(), &"Z".into(), &w, false),
            Err(RoutingError::UnknownNode(_))
        ));
    }

    #[test]
    fn closure_leaves_no_path() {
        let g = LogisticsGraph::from_parts(
            nodes(&["A", "B", "C"]),
            vec![EdgeAttrs::new("A", "B", 1.0, 1.0, 0.0), EdgeAttrs::new("B", "C", 1.0, 1.0, 0.0)],
        )
        .unwrap();
        let g = g.apply_disruption(&EdgeRef::new("A", "B"), Disruption::Close).unwrap();
        let err = shortest_path_scalarized(&g, &"A".into(), &"C".into(), &CriteriaWeights::default(), false).unwrap_err();
        assert!(matches!(err, RoutingError::NoPath { .. }));
    }

    #[test]
    fn expedite_rule_time_vs_cost() {
        // weights (1,1,0), factors (0.5, 3): expedite iff base_time > 4 * base_cost
        let w = CriteriaWeights::new(1.0, 1.0, 0.0).unwrap();
        for (t, c, expect) in [(10.0, 2.0, true), (8.0, 2.0, false), (7.0, 2.0, false), (100.0, 1.0, true)] {
            let g = LogisticsGraph::from_parts(
                nodes(&["A", "B"]),
                vec![EdgeAttrs::new("A", "B", t, c, 0.0).with_expedite(0.5, 3.0)],
            )
            .unwrap();
            let r = shortest_path_scalarized(&g, &"A".into(), &"B".into(), &w, true).unwrap();
            assert_eq!(r.hops[0].mode == Mode::Expedited, expect, "t={t} c={c}");
        }
    }

    #[test]
    fn ties_prefer_fewer_hops_then_lexicographic() {
        // A->D direct (score 2) vs A->B->D (score 2): direct wins on hops.
        let g = LogisticsGraph::from_parts(
            nodes(&["A", "B", "C", "D"]),
            vec![
                EdgeAttrs::new("A", "D", 2.0, 0.0, 0.0),
                EdgeAttrs::new("A", "B", 1.0, 0.0, 0.0),
                EdgeAttrs::new("B", "D", 1.0, 0.0, 0.0),
            ],
        )
        .unwrap();
        let w = CriteriaWeights::new(1.0, 0.0, 0.0).unwrap();
        let r = shortest_path_scalarized(&g, &"A".into(), &"D".into(), &w, false).unwrap();
        assert_eq!(r.hops.len(), 1);

        // Two 2-hop paths with equal score: via B beats via C.
        let g = LogisticsGraph::from_parts(
            nodes(&["A", "B", "C", "D"]),
            vec![
                EdgeAttrs::new("A", "C", 1.0, 0.0, 0.0),
                EdgeAttrs::new("C", "D", 1.0, 0.0, 0.0),
                EdgeAttrs::new("A", "B", 1.0, 0.0, 0.0),
                EdgeAttrs::new("B", "D", 1.0, 0.0, 0.0),
            ],
        )
        .unwrap();
        let r = shortest_path_scalarized(&g, &"A".into(), &"D".into(), &w, false).unwrap();
        assert_eq!(r.nodes()[1], NodeId::from("B"));
        assert_eq!(route_cost(&r, &w), 2.0);
    }
}
