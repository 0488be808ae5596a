//! Logistics graph and multi-criteria path computation.
//!
//! The production router ([`shortest_path_scalarized`]) is a label-setting
//! search over a weighted sum of (time, cost, risk). [`pareto_paths`] computes
//! the non-dominated front with a multi-label search. [`oracle`] enumerates
//! every simple path and is kept independent of both.

mod graph;
pub mod oracle;
mod pareto;
mod router;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::{Disruption, EdgeAttrs, EdgeRef, LogisticsGraph, Mode, NodeAttrs, NodeKind};
pub use pareto::{pareto_paths, DEFAULT_PARETO_BOUND};
pub use router::shortest_path_scalarized;

use crate::ids::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RoutingError {
    #[error("no path from {src} to {dst}")]
    NoPath { src: NodeId, dst: NodeId },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeRef),
    #[error("duplicate node {0}")]
    DuplicateNode(NodeId),
    #[error("duplicate edge {0}")]
    DuplicateEdge(EdgeRef),
    #[error("source equals destination ({0})")]
    SameEndpoints(NodeId),
    #[error("instance too large: {nodes} nodes > bound {bound}")]
    InstanceTooLarge { nodes: usize, bound: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriteriaWeights {
    pub time: f64,
    pub cost: f64,
    pub risk: f64,
}

impl CriteriaWeights {
    pub fn new(time: f64, cost: f64, risk: f64) -> Result<Self, RoutingError> {
        let w = Self { time, cost, risk };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), RoutingError> {
        let parts = [self.time, self.cost, self.risk];
        if parts.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(RoutingError::InvalidWeights(format!("{self:?}: each weight must be >= 0")));
        }
        if !(self.time + self.cost + self.risk > 0.0) {
            return Err(RoutingError::InvalidWeights("weights sum to zero".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            time: self.time * k,
            cost: self.cost * k,
            risk: self.risk * k,
        }
    }

    /// Contribution of a single hop.
    pub fn hop_score(&self, edge: &EdgeAttrs, mode: Mode) -> f64 {
        self.time * edge.time(mode) + self.cost * edge.cost(mode) + self.risk * edge.risk
    }
}

impl Default for CriteriaWeights {
    fn default() -> Self {
        Self {
            time: 1.0,
            cost: 1.0,
            risk: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub edge: EdgeAttrs,
    pub mode: Mode,
}

impl Hop {
    pub fn time(&self) -> f64 {
        self.edge.time(self.mode)
    }

    pub fn cost(&self) -> f64 {
        self.edge.cost(self.mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub hops: Vec<Hop>,
    pub total_time: f64,
    pub total_cost: f64,
    pub total_risk: f64,
}

impl Route {
    /// Totals accumulate hop by hop in path order.
    pub fn from_hops(hops: Vec<Hop>) -> Self {
        let (mut t, mut c, mut r) = (0.0, 0.0, 0.0);
        for h in &hops {
            t += h.time();
            c += h.cost();
            r += h.edge.risk;
        }
        Self {
            hops,
            total_time: t,
            total_cost: c,
            total_risk: r,
        }
    }

    pub fn src(&self) -> Option<&NodeId> {
        self.hops.first().map(|h| &h.edge.from)
    }

    pub fn dst(&self) -> Option<&NodeId> {
        self.hops.last().map(|h| &h.edge.to)
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.hops.len() + 1);
        if let Some(first) = self.hops.first() {
            out.push(first.edge.from.clone());
        }
        out.extend(self.hops.iter().map(|h| h.edge.to.clone()));
        out
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.hops.iter().map(|h| h.mode).collect()
    }

    pub fn criteria(&self) -> [f64; 3] {
        [self.total_time, self.total_cost, self.total_risk]
    }

    /// Contiguity, totals, simplicity, and (against `graph`) open edges only.
    pub fn check(&self, graph: Option<&LogisticsGraph>) -> Result<(), String> {
        if self.hops.is_empty() {
            return Err("route has no hops".into());
        }
        for w in self.hops.windows(2) {
            if w[0].edge.to != w[1].edge.from {
                return Err(format!("hops {} and {} not contiguous", w[0].edge.edge_ref(), w[1].edge.edge_ref()));
            }
        }
        let mut nodes = self.nodes();
        nodes.sort();
        nodes.dedup();
        if nodes.len() != self.hops.len() + 1 {
            return Err("route revisits a node".into());
        }
        let again = Route::from_hops(self.hops.clone());
        if again.criteria() != self.criteria() {
            return Err("route totals disagree with hops".into());
        }
        if let Some(g) = graph {
            for h in &self.hops {
                match g.edge(&h.edge.from, &h.edge.to) {
                    Some(e) if e.open => {}
                    Some(_) => return Err(format!("hop {} uses a closed edge", h.edge.edge_ref())),
                    None => return Err(format!("hop {} not in graph", h.edge.edge_ref())),
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for h in &self.hops {
            if first {
                write!(f, "{}", h.edge.from)?;
                first = false;
            }
            let tag = match h.mode {
                Mode::Normal => "",
                Mode::Expedited => "[x]",
            };
            write!(f, " -{tag}-> {}", h.edge.to)?;
        }
        write!(
            f,
            "  (time {}, cost {}, risk {})",
            self.total_time, self.total_cost, self.total_risk
        )
    }
}

/// Weighted-sum score of a route, accumulated per hop in path order.
pub fn route_cost(route: &Route, weights: &CriteriaWeights) -> f64 {
    route.hops.iter().fold(0.0, |acc, h| acc + weights.hop_score(&h.edge, h.mode))
}

/// Total order used to pick one route among equals: score, then hop count,
/// then node-id sequence, then modes (normal before expedited).
pub fn compare_routes(a: &Route, b: &Route, weights: &CriteriaWeights) -> Ordering {
    route_cost(a, weights)
        .total_cmp(&route_cost(b, weights))
        .then(a.hops.len().cmp(&b.hops.len()))
        .then_with(|| a.nodes().cmp(&b.nodes()))
        .then_with(|| a.modes().cmp(&b.modes()))
}

/// `a` strictly dominates `b`: no worse on every criterion, better on one.
pub fn dominates(a: &[f64; 3], b: &[f64; 3]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a != b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn route_with(t: f64, c: f64, r: f64) -> Route {
        Route::from_hops(vec![Hop {
            edge: EdgeAttrs::new("A", "C", t, c, r),
            mode: Mode::Normal,
        }])
    }

    #[test]
    fn route_cost_unit_weights() {
        let r = route_with(2.0, 10.0, 0.1);
        let w = CriteriaWeights::new(1.0, 1.0, 1.0).unwrap();
        assert!((route_cost(&r, &w) - 12.1).abs() < 1e-12);
    }

    #[test]
    fn route_cost_risk_only() {
        let r = route_with(2.0, 10.0, 0.1);
        let w = CriteriaWeights::new(0.0, 0.0, 1.0).unwrap();
        assert_eq!(route_cost(&r, &w), 0.1);
    }

    #[test]
    fn zero_weights_rejected() {
        assert!(CriteriaWeights::new(0.0, 0.0, 0.0).is_err());
        assert!(CriteriaWeights::new(-1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn domination_is_strict() {
        assert!(dominates(&[1.0, 1.0, 0.0], &[1.0, 2.0, 0.0]));
        assert!(!dominates(&[1.0, 1.0, 0.0], &[1.0, 1.0, 0.0]));
        assert!(!dominates(&[2.0, 10.0, 0.1], &[5.0, 4.0, 0.1]));
    }
}
