//! Layer 3: blocks and their routes.

use std::collections::BTreeMap;

use super::transport::Load;
use crate::ids::{BlockId, ContainerId, IdGen, LoadId, Minutes, NodeId};
use crate::routing::{route_cost, shortest_path_scalarized, CriteriaWeights, Hop, LogisticsGraph, Route, RoutingError};

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub block_id: BlockId,
    /// Loads sharing (location, destination) may be combined, hence a list.
    pub parent_loads: Vec<LoadId>,
    pub container_ids: Vec<ContainerId>,
    pub src: NodeId,
    pub dst: NodeId,
    pub location: NodeId,
    /// Full route from `src`; hops before `progress` are done.
    pub route: Option<Route>,
    pub progress: usize,
    /// The hop at `progress` has left and cannot be changed.
    pub hop_started: bool,
    pub history: Vec<NodeId>,
    pub parked: bool,
    pub deadline: Minutes,
}

impl Block {
    pub fn current_hop(&self) -> Option<&Hop> {
        self.route.as_ref()?.hops.get(self.progress)
    }

    pub fn remaining_hops(&self) -> &[Hop] {
        match &self.route {
            Some(r) => &r.hops[self.progress.min(r.hops.len())..],
            None => &[],
        }
    }

    pub fn is_complete(&self) -> bool {
        self.location == self.dst
    }

    /// Where a new route would start: the far end of a hop already under way.
    pub fn anchor(&self) -> NodeId {
        match (self.hop_started, self.current_hop()) {
            (true, Some(h)) => h.edge.to.clone(),
            _ => self.location.clone(),
        }
    }

    pub fn start_hop(&mut self) {
        self.hop_started = true;
    }

    /// The current hop finished; the block now sits at its far end.
    pub fn advance(&mut self) -> Option<NodeId> {
        let to = self.current_hop()?.edge.to.clone();
        self.progress += 1;
        self.hop_started = false;
        self.location = to.clone();
        self.history.push(to.clone());
        Some(to)
    }

    /// A started hop was abandoned; the block stays where it was.
    pub fn roll_back_hop(&mut self) {
        self.hop_started = false;
    }
}

/// Splits and merges loads into blocks of at most `max_block_size`
/// containers, one block per destination, deadline order preserved.
pub fn build_blocks(loads: &[Load], max_block_size: usize, ids: &mut IdGen) -> Vec<Block> {
    let max = max_block_size.max(1);
    let mut groups: BTreeMap<(NodeId, NodeId), Vec<&Load>> = BTreeMap::new();
    for l in loads {
        groups
            .entry((l.location.clone(), l.destination.clone()))
            .or_default()
            .push(l);
    }
    let mut blocks = Vec::new();
    for ((at, dst), mut group) in groups {
        group.sort_by(|a, b| a.deadline.cmp(&b.deadline).then_with(|| a.load_id.cmp(&b.load_id)));
        let flat: Vec<(&Load, &ContainerId)> = group
            .iter()
            .flat_map(|l| l.container_ids.iter().map(move |c| (*l, c)))
            .collect();
        for chunk in flat.chunks(max) {
            let mut parents: Vec<LoadId> = Vec::new();
            for (l, _) in chunk {
                if !parents.contains(&l.load_id) {
                    parents.push(l.load_id.clone());
                }
            }
            blocks.push(Block {
                block_id: BlockId::new(ids.next("B")),
                parent_loads: parents,
                container_ids: chunk.iter().map(|(_, c)| (*c).clone()).collect(),
                src: at.clone(),
                dst: dst.clone(),
                location: at.clone(),
                route: None,
                progress: 0,
                hop_started: false,
                history: vec![at.clone()],
                parked: false,
                deadline: chunk.iter().map(|(l, _)| l.deadline).min().expect("chunk non-empty"),
            });
        }
    }
    blocks
}

/// Routes a fresh or parked block from where it is. On failure the block
/// comes back parked with the router's error.
#[allow(clippy::result_large_err)] // the block comes back to its owner on failure
pub fn route_block(
    mut block: Block,
    graph: &LogisticsGraph,
    weights: &CriteriaWeights,
    allow_expedite: bool,
) -> Result<Block, (Block, RoutingError)> {
    let done: Vec<Hop> = block.route.as_ref().map(|r| r.hops[..block.progress].to_vec()).unwrap_or_default();
    match shortest_path_scalarized(graph, &block.location, &block.dst, weights, allow_expedite) {
        Ok(r) => {
            let mut hops = done;
            hops.extend(r.hops);
            block.route = Some(Route::from_hops(hops));
            block.parked = false;
            block.hop_started = false;
            Ok(block)
        }
        Err(e) => {
            block.parked = true;
            Err((block, e))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RerouteOutcome {
    /// Remaining route still open and no worse than the best alternative.
    Kept,
    Replaced,
    Parked(RoutingError),
}

/// Re-plans the part of the route not yet under way. Completed hops and a
/// started hop are kept as they are.
pub fn reroute(
    mut block: Block,
    graph: &LogisticsGraph,
    weights: &CriteriaWeights,
    allow_expedite: bool,
) -> (Block, RerouteOutcome) {
    let anchor = block.anchor();
    let committed = block.progress + usize::from(block.hop_started && block.current_hop().is_some());
    let prefix: Vec<Hop> = block
        .route
        .as_ref()
        .map(|r| r.hops[..committed.min(r.hops.len())].to_vec())
        .unwrap_or_default();
    if anchor == block.dst {
        return (block, RerouteOutcome::Kept);
    }

    // Re-price the remaining plan against the changed graph.
    let old_rest: Option<Vec<Hop>> = block.route.as_ref().and_then(|r| {
        r.hops[committed.min(r.hops.len())..]
            .iter()
            .map(|h| {
                graph.edge(&h.edge.from, &h.edge.to).filter(|e| e.open).map(|e| Hop {
                    edge: e.clone(),
                    mode: h.mode,
                })
            })
            .collect()
    });
    let old_rest = old_rest.filter(|hops| !hops.is_empty() && !block.parked);

    match shortest_path_scalarized(graph, &anchor, &block.dst, weights, allow_expedite) {
        Ok(best) => {
            let (rest, outcome) = match old_rest {
                Some(old) if route_cost(&Route::from_hops(old.clone()), weights) <= route_cost(&best, weights) => {
                    (old, RerouteOutcome::Kept)
                }
                _ => (best.hops, RerouteOutcome::Replaced),
            };
            let mut hops = prefix;
            hops.extend(rest);
            block.route = Some(Route::from_hops(hops));
            block.parked = false;
            (block, outcome)
        }
        Err(e) => {
            // Drop the unusable tail; a started hop still lands first.
            block.route = if prefix.is_empty() { None } else { Some(Route::from_hops(prefix)) };
            block.parked = true;
            (block, RerouteOutcome::Parked(e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::order::OrderKind;
    use crate::layers::transport::LoadStatus;
    use crate::routing::{Disruption, EdgeAttrs, EdgeRef, NodeAttrs, NodeKind};

    fn load(id: &str, n: usize, deadline: Minutes) -> Load {
        Load {
            load_id: id.into(),
            kind: OrderKind::Customer,
            member_orders: vec![],
            container_ids: (0..n).map(|i| format!("{id}-{i}").into()).collect(),
            origin: "A".into(),
            destination: "C".into(),
            deadline,
            status: LoadStatus::Pending,
            location: "A".into(),
        }
    }

    #[test]
    fn one_small_load_one_block() {
        let mut ids = IdGen::new();
        let bs = build_blocks(&[load("L1", 6, 10)], 10, &mut ids);
        assert_eq!(bs.len(), 1);
        assert_eq!(bs[0].container_ids.len(), 6);
    }

    #[test]
    fn two_loads_chunk_ten_and_two() {
        let mut ids = IdGen::new();
        let bs = build_blocks(&[load("L2", 6, 20), load("L1", 6, 10)], 10, &mut ids);
        assert_eq!(bs.iter().map(|b| b.container_ids.len()).collect::<Vec<_>>(), vec![10, 2]);
        assert_eq!(bs[0].parent_loads, vec![LoadId::from("L1"), "L2".into()]);
        assert_eq!(bs[0].container_ids[0].as_str(), "L1-0");
        assert_eq!(bs[0].deadline, 10);
        assert_eq!(bs[1].parent_loads, vec![LoadId::from("L2")]);
    }

    fn graph() -> LogisticsGraph {
        let nodes = ["A", "B", "C", "D"]
            .iter()
            .map(|n| NodeAttrs {
                node_id: (*n).into(),
                kind: NodeKind::Hub,
                accepts_dangerous: true,
                reefer_plugs: 0,
                is_container_depot: false,
            })
            .collect();
        let edges = vec![
            EdgeAttrs::new("A", "B", 1.0, 1.0, 0.0),
            EdgeAttrs::new("B", "C", 1.0, 1.0, 0.0),
            EdgeAttrs::new("A", "D", 2.0, 2.0, 0.0),
            EdgeAttrs::new("D", "C", 2.0, 2.0, 0.0),
        ];
        LogisticsGraph::from_parts(nodes, edges).unwrap()
    }

    fn routed() -> Block {
        let mut ids = IdGen::new();
        let b = build_blocks(&[load("L1", 2, 10)], 10, &mut ids).remove(0);
        route_block(b, &graph(), &CriteriaWeights::default(), false).unwrap()
    }

    #[test]
    fn route_block_matches_router() {
        let w = CriteriaWeights::default();
        let b = routed();
        let direct = shortest_path_scalarized(&graph(), &"A".into(), &"C".into(), &w, false).unwrap();
        assert_eq!(b.route.as_ref().unwrap(), &direct);
    }

    #[test]
    fn closure_before_departure_replaces_route() {
        let g = graph().apply_disruption(&EdgeRef::new("B", "C"), Disruption::Close).unwrap();
        let (b, out) = reroute(routed(), &g, &CriteriaWeights::default(), false);
        assert_eq!(out, RerouteOutcome::Replaced);
        let nodes = b.route.as_ref().unwrap().nodes();
        assert_eq!(nodes, vec![NodeId::from("A"), "D".into(), "C".into()]);
        b.route.unwrap().check(Some(&g)).unwrap();
    }

    #[test]
    fn started_hop_is_committed() {
        let g = graph().apply_disruption(&EdgeRef::new("B", "C"), Disruption::Close).unwrap();
        let mut b = routed();
        b.start_hop();
        let (b, out) = reroute(b, &g, &CriteriaWeights::default(), false);
        // B has no other way to C
        assert!(matches!(out, RerouteOutcome::Parked(RoutingError::NoPath { .. })));
        assert_eq!(b.route.as_ref().unwrap().hops.len(), 1);
        assert_eq!(b.current_hop().unwrap().edge.to.as_str(), "B");
    }

    #[test]
    fn unrelated_change_keeps_route() {
        let g = graph().apply_disruption(&EdgeRef::new("A", "D"), Disruption::Close).unwrap();
        let before = routed();
        let (b, out) = reroute(before.clone(), &g, &CriteriaWeights::default(), false);
        assert_eq!(out, RerouteOutcome::Kept);
        assert_eq!(b.route, before.route);
    }

    #[test]
    fn advance_tracks_history() {
        let mut b = routed();
        b.start_hop();
        assert_eq!(b.anchor().as_str(), "B");
        b.advance();
        b.advance();
        assert!(b.is_complete());
        assert_eq!(b.history, vec![NodeId::from("A"), "B".into(), "C".into()]);
        assert!(b.current_hop().is_none());
    }
}
