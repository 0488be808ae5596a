use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use super::{compare_routes, dominates, CriteriaWeights, Hop, LogisticsGraph, Mode, Route, RoutingError};
use crate::ids::NodeId;

pub const DEFAULT_PARETO_BOUND: usize = 12;

struct Label {
    crit: [f64; 3],
    path: Vec<NodeId>,
    hops: Vec<Hop>,
    alive: bool,
}

#[derive(PartialEq, Eq)]
struct Pending {
    idx: usize,
    crit: [OrdF; 3],
}

#[derive(PartialEq, Eq, Clone, Copy)]
struct OrdF(u64);

impl OrdF {
    fn new(x: f64) -> Self {
        // total_cmp order preserved by this bit transform for the values we use
        let bits = x.to_bits();
        let key = if bits >> 63 == 1 { !bits } else { bits | (1 << 63) };
        OrdF(key)
    }
}

impl Ord for OrdF {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0)
    }
}

impl PartialOrd for OrdF {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        other.crit.cmp(&self.crit).then(other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Non-dominated routes under (time, cost, risk), truncated to `max_paths`
/// by weighted score.
///
/// Multi-label search: labels leave the queue in lexicographic criteria
/// order; a label is discarded when another label at the same node strictly
/// dominates it. Equal vectors are all kept, so parallel optima are all
/// reported.
pub fn pareto_paths(
    graph: &LogisticsGraph,
    src: &NodeId,
    dst: &NodeId,
    max_paths: usize,
    weights: &CriteriaWeights,
    allow_expedite: bool,
    bound: usize,
) -> Result<Vec<Route>, RoutingError> {
    weights.validate()?;
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

    let modes: &[Mode] = if allow_expedite {
        &[Mode::Normal, Mode::Expedited]
    } else {
        &[Mode::Normal]
    };

    let mut arena: Vec<Label> = Vec::new();
    let mut at_node: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    let mut front: Vec<usize> = Vec::new();

    arena.push(Label {
        crit: [0.0; 3],
        path: vec![src.clone()],
        hops: Vec::new(),
        alive: true,
    });
    at_node.entry(src.clone()).or_default().push(0);
    heap.push(Pending {
        idx: 0,
        crit: [OrdF::new(0.0); 3],
    });

    while let Some(Pending { idx, .. }) = heap.pop() {
        if !arena[idx].alive {
            continue;
        }
        let at = arena[idx].path.last().expect("non-empty path").clone();
        if &at == dst {
            front.push(idx);
            continue;
        }
        let base_crit = arena[idx].crit;
        let base_path = arena[idx].path.clone();
        let base_hops = arena[idx].hops.clone();
        for edge in graph.open_out_edges(&at) {
            if base_path.contains(&edge.to) {
                continue;
            }
            for &mode in modes {
                let crit = [
                    base_crit[0] + edge.time(mode),
                    base_crit[1] + edge.cost(mode),
                    base_crit[2] + edge.risk,
                ];
                let peers = at_node.entry(edge.to.clone()).or_default();
                if peers.iter().any(|&p| arena[p].alive && dominates(&arena[p].crit, &crit)) {
                    continue;
                }
                for &p in peers.iter() {
                    if arena[p].alive && dominates(&crit, &arena[p].crit) {
                        arena[p].alive = false;
                    }
                }
                peers.retain(|&p| arena[p].alive);
                let mut path = base_path.clone();
                path.push(edge.to.clone());
                let mut hops = base_hops.clone();
                hops.push(Hop {
                    edge: edge.clone(),
                    mode,
                });
                let new_idx = arena.len();
                arena.push(Label {
                    crit,
                    path,
                    hops,
                    alive: true,
                });
                peers.push(new_idx);
                heap.push(Pending {
                    idx: new_idx,
                    crit: crit.map(OrdF::new),
                });
            }
        }
    }

    if front.is_empty() {
        return Err(RoutingError::NoPath {
            src: src.clone(),
            dst: dst.clone(),
        });
    }
    let mut routes: Vec<Route> = front
        .into_iter()
        .filter(|&i| arena[i].alive)
        .map(|i| Route::from_hops(arena[i].hops.clone()))
        .collect();
    routes.sort_by(|a, b| compare_routes(a, b, weights));
    routes.truncate(max_paths);
    Ok(routes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::routing::{EdgeAttrs, NodeAttrs, NodeKind};

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
    fn single_path_front() {
        let g = LogisticsGraph::from_parts(nodes(&["A", "B"]), vec![EdgeAttrs::new("A", "B", 1.0, 1.0, 0.0)]).unwrap();
        let f = pareto_paths(&g, &"A".into(), &"B".into(), 10, &CriteriaWeights::default(), false, 12).unwrap();
        assert_eq!(f.len(), 1);
    }

    #[test]
    fn incomparable_paths_both_kept() {
        let g = LogisticsGraph::from_parts(
            nodes(&["A", "B", "C"]),
            vec![
                EdgeAttrs::new("A", "C", 2.0, 10.0, 0.1),
                EdgeAttrs::new("A", "B", 2.5, 2.0, 0.05),
                EdgeAttrs::new("B", "C", 2.5, 2.0, 0.05),
            ],
        )
        .unwrap();
        let f = pareto_paths(&g, &"A".into(), &"C".into(), 10, &CriteriaWeights::default(), false, 12).unwrap();
        assert_eq!(f.len(), 2);
        let mut vecs: Vec<_> = f.iter().map(|r| (r.total_time, r.total_cost)).collect();
        vecs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(vecs, vec![(2.0, 10.0), (5.0, 4.0)]);
    }

    #[test]
    fn bound_enforced() {
        let ids: Vec<String> = (0..13).map(|i| format!("N{i:02}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let g = LogisticsGraph::from_parts(nodes(&refs), vec![]).unwrap();
        let err = pareto_paths(&g, &"N00".into(), &"N01".into(), 5, &CriteriaWeights::default(), false, 12).unwrap_err();
        assert!(matches!(err, RoutingError::InstanceTooLarge { nodes: 13, bound: 12 }));
    }

    #[test]
    fn dominated_path_dropped() {
        let g = LogisticsGraph::from_parts(
            nodes(&["A", "B", "C"]),
            vec![
                EdgeAttrs::new("A", "C", 2.0, 2.0, 0.0),
                EdgeAttrs::new("A", "B", 2.0, 2.0, 0.0),
                EdgeAttrs::new("B", "C", 2.0, 2.0, 0.0),
            ],
        )
        .unwrap();
        let f = pareto_paths(&g, &"A".into(), &"C".into(), 10, &CriteriaWeights::default(), false, 12).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].hops.len(), 1);
    }
}
