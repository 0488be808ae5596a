use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::RoutingError;
use crate::ids::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Hub,
    Depot,
    ConsignorSite,
    ConsigneeSite,
    Disposal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeAttrs {
    #[serde(rename = "id")]
    pub node_id: NodeId,
    pub kind: NodeKind,
    #[serde(default = "yes")]
    pub accepts_dangerous: bool,
    #[serde(default)]
    pub reefer_plugs: u32,
    #[serde(default)]
    pub is_container_depot: bool,
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Normal,
    Expedited,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeRef {
    pub from: NodeId,
    pub to: NodeId,
}

impl EdgeRef {
    pub fn new(from: impl Into<NodeId>, to: impl Into<NodeId>) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
        }
    }
}

impl fmt::Display for EdgeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeAttrs {
    pub from: NodeId,
    pub to: NodeId,
    pub base_time: f64,
    pub base_cost: f64,
    #[serde(default)]
    pub risk: f64,
    #[serde(default = "one")]
    pub expedite_time_factor: f64,
    #[serde(default = "one")]
    pub expedite_cost_factor: f64,
    #[serde(default = "yes")]
    pub open: bool,
}

impl EdgeAttrs {
    pub fn new(from: impl Into<NodeId>, to: impl Into<NodeId>, base_time: f64, base_cost: f64, risk: f64) -> Self {
        Self {
            from: from.into(),
            to: to.into(),
            base_time,
            base_cost,
            risk,
            expedite_time_factor: 1.0,
            expedite_cost_factor: 1.0,
            open: true,
        }
    }

    pub fn with_expedite(mut self, time_factor: f64, cost_factor: f64) -> Self {
        self.expedite_time_factor = time_factor;
        self.expedite_cost_factor = cost_factor;
        self
    }

    pub fn edge_ref(&self) -> EdgeRef {
        EdgeRef::new(self.from.clone(), self.to.clone())
    }

    pub fn time(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Normal => self.base_time,
            Mode::Expedited => self.base_time * self.expedite_time_factor,
        }
    }

    pub fn cost(&self, mode: Mode) -> f64 {
        match mode {
            Mode::Normal => self.base_cost,
            Mode::Expedited => self.base_cost * self.expedite_cost_factor,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.base_time > 0.0) {
            return Err(format!("edge {}: base_time must be > 0", self.edge_ref()));
        }
        if !(self.base_cost >= 0.0) {
            return Err(format!("edge {}: base_cost must be >= 0", self.edge_ref()));
        }
        if !(0.0..=1.0).contains(&self.risk) {
            return Err(format!("edge {}: risk must be in [0,1]", self.edge_ref()));
        }
        if !(self.expedite_time_factor > 0.0 && self.expedite_time_factor <= 1.0) {
            return Err(format!("edge {}: expedite_time_factor must be in (0,1]", self.edge_ref()));
        }
        if !(self.expedite_cost_factor >= 1.0) {
            return Err(format!("edge {}: expedite_cost_factor must be >= 1", self.edge_ref()));
        }
        if self.from == self.to {
            return Err(format!("edge {}: self loop", self.edge_ref()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Disruption {
    Close,
    Reopen,
    CostSurge { multiplier: f64 },
    DelaySurge { multiplier: f64 },
}

/// Immutable-by-convention graph snapshot. Mutations go through
/// [`LogisticsGraph::apply_disruption`], which returns the next version.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogisticsGraph {
    nodes: BTreeMap<NodeId, NodeAttrs>,
    edges: BTreeMap<EdgeRef, EdgeAttrs>,
    out: BTreeMap<NodeId, Vec<NodeId>>,
    version: u64,
}

impl LogisticsGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(nodes: Vec<NodeAttrs>, edges: Vec<EdgeAttrs>) -> Result<Self, RoutingError> {
        let mut g = Self::new();
        for n in nodes {
            g.add_node(n)?;
        }
        for e in edges {
            g.add_edge(e)?;
        }
        Ok(g)
    }

    pub fn add_node(&mut self, attrs: NodeAttrs) -> Result<(), RoutingError> {
        if self.nodes.contains_key(&attrs.node_id) {
            return Err(RoutingError::DuplicateNode(attrs.node_id));
        }
        self.out.entry(attrs.node_id.clone()).or_default();
        self.nodes.insert(attrs.node_id.clone(), attrs);
        Ok(())
    }

    pub fn add_edge(&mut self, attrs: EdgeAttrs) -> Result<(), RoutingError> {
        for n in [&attrs.from, &attrs.to] {
            if !self.nodes.contains_key(n) {
                return Err(RoutingError::UnknownNode(n.clone()));
            }
        }
        let key = attrs.edge_ref();
        if self.edges.contains_key(&key) {
            return Err(RoutingError::DuplicateEdge(key));
        }
        let adj = self.out.entry(attrs.from.clone()).or_default();
        adj.push(attrs.to.clone());
        adj.sort();
        self.edges.insert(key, attrs);
        Ok(())
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn node(&self, id: &NodeId) -> Option<&NodeAttrs> {
        self.nodes.get(id)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeAttrs> {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = &EdgeAttrs> {
        self.edges.values()
    }

    pub fn edge(&self, from: &NodeId, to: &NodeId) -> Option<&EdgeAttrs> {
        self.edges.get(&EdgeRef::new(from.clone(), to.clone()))
    }

    /// Outgoing edges in ascending target-id order, closed edges included.
    pub fn out_edges<'a>(&'a self, from: &NodeId) -> impl Iterator<Item = &'a EdgeAttrs> + 'a {
        let from = from.clone();
        self.out
            .get(&from)
            .into_iter()
            .flatten()
            .filter_map(move |to| self.edges.get(&EdgeRef::new(from.clone(), to.clone())))
    }

    pub fn open_out_edges<'a>(&'a self, from: &NodeId) -> impl Iterator<Item = &'a EdgeAttrs> + 'a {
        self.out_edges(from).filter(|e| e.open)
    }

    /// Next snapshot with one edge mutated. Surges persist across close/reopen.
    pub fn apply_disruption(&self, edge: &EdgeRef, event: Disruption) -> Result<LogisticsGraph, RoutingError> {
        let mut next = self.clone();
        let attrs = next
            .edges
            .get_mut(edge)
            .ok_or_else(|| RoutingError::UnknownEdge(edge.clone()))?;
        match event {
            Disruption::Close => attrs.open = false,
            Disruption::Reopen => attrs.open = true,
            Disruption::CostSurge { multiplier } => attrs.base_cost *= multiplier,
            Disruption::DelaySurge { multiplier } => attrs.base_time *= multiplier,
        }
        next.version += 1;
        Ok(next)
    }

    /// Nodes reachable from `src` over open edges, `src` included.
    pub fn reachable_from(&self, src: &NodeId) -> std::collections::BTreeSet<NodeId> {
        let mut seen = std::collections::BTreeSet::new();
        let mut stack = vec![src.clone()];
        while let Some(n) = stack.pop() {
            if !seen.insert(n.clone()) {
                continue;
            }
            for e in self.open_out_edges(&n) {
                if !seen.contains(&e.to) {
                    stack.push(e.to.clone());
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str) -> NodeAttrs {
        NodeAttrs {
            node_id: id.into(),
            kind: NodeKind::Hub,
            accepts_dangerous: true,
            reefer_plugs: 0,
            is_container_depot: false,
        }
    }

    #[test]
    fn cost_surge_multiplies() {
        let g = LogisticsGraph::from_parts(vec![node("A"), node("B")], vec![EdgeAttrs::new("A", "B", 1.0, 5.0, 0.0)]).unwrap();
        let g2 = g
            .apply_disruption(&EdgeRef::new("A", "B"), Disruption::CostSurge { multiplier: 2.0 })
            .unwrap();
        assert_eq!(g2.edge(&"A".into(), &"B".into()).unwrap().base_cost, 10.0);
        assert_eq!(g2.version(), g.version() + 1);
    }

    #[test]
    fn unknown_edge_rejected() {
        let g = LogisticsGraph::from_parts(vec![node("A"), node("B")], vec![]).unwrap();
        let err = g.apply_disruption(&EdgeRef::new("A", "B"), Disruption::Close).unwrap_err();
        assert!(matches!(err, RoutingError::UnknownEdge(_)));
    }

    #[test]
    fn close_then_reopen_restores_attrs() {
        let g = LogisticsGraph::from_parts(vec![node("A"), node("B")], vec![EdgeAttrs::new("A", "B", 1.0, 5.0, 0.0)]).unwrap();
        let e = EdgeRef::new("A", "B");
        let g2 = g.apply_disruption(&e, Disruption::Close).unwrap();
        assert!(!g2.edge(&e.from, &e.to).unwrap().open);
        let g3 = g2.apply_disruption(&e, Disruption::Reopen).unwrap();
        assert_eq!(g3.edge(&e.from, &e.to), g.edge(&e.from, &e.to));
    }

    #[test]
    fn expedite_arithmetic() {
        let e = EdgeAttrs::new("A", "B", 120.0, 10.0, 0.0).with_expedite(0.5, 3.0);
        assert_eq!(e.time(Mode::Expedited), 60.0);
        assert_eq!(e.cost(Mode::Expedited), 30.0);
    }
}
