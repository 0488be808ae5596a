//! Layer 6: container integrity, sets, orphans, and empty-container depots.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{ClassId, Contract, Integrity, PiContainer};
use crate::ids::{ContainerId, DemandId, IdGen, Minutes, NodeId, SetId};
use crate::routing::{route_cost, shortest_path_scalarized, CriteriaWeights, LogisticsGraph};

/// A container as seen by the set/order machinery.
#[derive(Debug, Clone, PartialEq)]
pub struct SetMember {
    pub container_id: ContainerId,
    pub origin: NodeId,
    pub destination: NodeId,
    pub deadline: Minutes,
    pub priority: u8,
    pub dangerous: bool,
    pub reefer: bool,
    /// Declared client sub-order this container belongs to, if any.
    pub suborder: Option<(DemandId, u32)>,
    pub contract: Option<Contract>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainerSet {
    pub set_id: SetId,
    pub origin: NodeId,
    pub destination: NodeId,
    pub members: Vec<SetMember>,
}

impl ContainerSet {
    pub fn containers(&self) -> Vec<ContainerId> {
        self.members.iter().map(|m| m.container_id.clone()).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SetPolicy {
    pub max_set_size: Option<usize>,
}

/// Partition by (origin, destination); members ordered by deadline then id.
/// Output order is canonical, independent of input order.
pub fn group_into_sets(members: &[SetMember], policy: &SetPolicy, ids: &mut IdGen) -> Vec<ContainerSet> {
    let mut groups: BTreeMap<(NodeId, NodeId), Vec<SetMember>> = BTreeMap::new();
    for m in members {
        groups
            .entry((m.origin.clone(), m.destination.clone()))
            .or_default()
            .push(m.clone());
    }
    let mut sets = Vec::new();
    for ((origin, destination), mut group) in groups {
        group.sort_by(|a, b| a.deadline.cmp(&b.deadline).then_with(|| a.container_id.cmp(&b.container_id)));
        let chunk = policy.max_set_size.unwrap_or(usize::MAX).max(1);
        for part in group.chunks(chunk) {
            sets.push(ContainerSet {
                set_id: SetId::new(ids.next("SET")),
                origin: origin.clone(),
                destination: destination.clone(),
                members: part.to_vec(),
            });
        }
    }
    sets
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrityReport {
    pub container_id: ContainerId,
    pub passed: bool,
    /// Damaged containers go to a depot for testing; they are never deleted.
    pub send_to_depot: bool,
    /// Damage is reported up to the order layer when goods were inside.
    pub signal_order_layer: bool,
}

pub fn inspect_container(c: &PiContainer) -> IntegrityReport {
    let damaged = c.integrity == Integrity::Damaged;
    IntegrityReport {
        container_id: c.container_id.clone(),
        passed: !damaged,
        send_to_depot: damaged,
        signal_order_layer: damaged,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Disposition {
    /// Already at a disposal node.
    Hold { node: NodeId },
    RouteTo { node: NodeId, score: f64 },
    /// No disposal node reachable; held where it is.
    Stranded { node: NodeId },
}

/// Where an orphan container goes: the cheapest reachable disposal node.
pub fn handle_orphan(
    at: &NodeId,
    disposal_nodes: &[NodeId],
    graph: &LogisticsGraph,
    weights: &CriteriaWeights,
    allow_expedite: bool,
) -> Disposition {
    if disposal_nodes.contains(at) {
        return Disposition::Hold { node: at.clone() };
    }
    nearest(at, disposal_nodes, graph, weights, allow_expedite)
        .map(|(node, score)| Disposition::RouteTo { node, score })
        .unwrap_or(Disposition::Stranded { node: at.clone() })
}

/// Cheapest reachable target by scalarized route score, ties by node id.
pub fn nearest(
    at: &NodeId,
    targets: &[NodeId],
    graph: &LogisticsGraph,
    weights: &CriteriaWeights,
    allow_expedite: bool,
) -> Option<(NodeId, f64)> {
    let mut best: Option<(NodeId, f64)> = None;
    let mut sorted = targets.to_vec();
    sorted.sort();
    sorted.dedup();
    for t in sorted {
        if &t == at {
            return Some((t, 0.0));
        }
        if let Ok(route) = shortest_path_scalarized(graph, at, &t, weights, allow_expedite) {
            let score = route_cost(&route, weights);
            if best.as_ref().is_none_or(|(_, s)| score < *s) {
                best = Some((t, score));
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepotState {
    pub node_id: NodeId,
    #[serde(default)]
    pub empty_stock: BTreeMap<ClassId, u32>,
    #[serde(default)]
    pub min_level: BTreeMap<ClassId, u32>,
    #[serde(default)]
    pub max_level: BTreeMap<ClassId, u32>,
}

impl DepotState {
    pub fn stock(&self, class: ClassId) -> u32 {
        self.empty_stock.get(&class).copied().unwrap_or(0)
    }

    pub fn min(&self, class: ClassId) -> u32 {
        self.min_level.get(&class).copied().unwrap_or(0)
    }

    /// Unset max means "no ceiling".
    pub fn max(&self, class: ClassId) -> u32 {
        self.max_level.get(&class).copied().unwrap_or(u32::MAX)
    }

    pub fn validate(&self) -> Result<(), String> {
        for class in ClassId::ALL {
            if self.min(class) > self.max(class) {
                return Err(format!(
                    "depot {}: min_level {} > max_level {} for {}",
                    self.node_id,
                    self.min(class),
                    self.max(class),
                    class.as_str()
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepositionOrder {
    pub class: ClassId,
    pub from: NodeId,
    pub to: NodeId,
    pub count: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RepositionPlan {
    pub orders: Vec<RepositionOrder>,
    /// (node, class, unmet count)
    pub shortages: Vec<(NodeId, ClassId, u32)>,
}

/// Threshold policy. Depots below `min_level` ask for `max_level - stock`;
/// depots above `max_level` donate, never dropping below their own
/// `min_level`; donors are taken cheapest route first.
pub fn reposition_empties(
    depots: &[DepotState],
    graph: &LogisticsGraph,
    weights: &CriteriaWeights,
    allow_expedite: bool,
) -> RepositionPlan {
    let mut plan = RepositionPlan::default();
    let mut by_node: BTreeMap<NodeId, DepotState> = BTreeMap::new();
    for d in depots {
        by_node.insert(d.node_id.clone(), d.clone());
    }
    for class in ClassId::ALL {
        let mut available: BTreeMap<NodeId, u32> = by_node
            .values()
            .filter(|d| d.stock(class) > d.max(class))
            .map(|d| (d.node_id.clone(), d.stock(class) - d.min(class)))
            .collect();
        let recipients: Vec<&DepotState> = by_node.values().filter(|d| d.stock(class) < d.min(class)).collect();
        for r in recipients {
            // no declared ceiling: fill to the floor
            let ceiling = if r.max_level.contains_key(&class) { r.max(class) } else { r.min(class) };
            let mut need = ceiling.saturating_sub(r.stock(class));
            let mut donors: Vec<(f64, NodeId)> = available
                .iter()
                .filter(|(_, a)| **a > 0)
                .filter_map(|(n, _)| {
                    shortest_path_scalarized(graph, n, &r.node_id, weights, allow_expedite)
                        .ok()
                        .map(|route| (route_cost(&route, weights), n.clone()))
                })
                .collect();
            donors.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            for (score, donor) in donors {
                if need == 0 {
                    break;
                }
                let avail = available.get_mut(&donor).expect("donor listed");
                let take = need.min(*avail);
                if take == 0 {
                    continue;
                }
                *avail -= take;
                need -= take;
                plan.orders.push(RepositionOrder {
                    class,
                    from: donor,
                    to: r.node_id.clone(),
                    count: take,
                    score,
                });
            }
            if need > 0 {
                plan.shortages.push((r.node_id.clone(), class, need));
            }
        }
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ContainerClass;
    use crate::routing::{EdgeAttrs, NodeAttrs, NodeKind};

    fn member(id: &str, o: &str, d: &str, deadline: Minutes) -> SetMember {
        SetMember {
            container_id: id.into(),
            origin: o.into(),
            destination: d.into(),
            deadline,
            priority: 1,
            dangerous: false,
            reefer: false,
            suborder: None,
            contract: None,
        }
    }

    fn graph(nodes: &[&str], edges: &[(&str, &str, f64)]) -> LogisticsGraph {
        LogisticsGraph::from_parts(
            nodes
                .iter()
                .map(|n| NodeAttrs {
                    node_id: (*n).into(),
                    kind: NodeKind::Depot,
                    accepts_dangerous: true,
                    reefer_plugs: 0,
                    is_container_depot: true,
                })
                .collect(),
            edges.iter().map(|(a, b, c)| EdgeAttrs::new(*a, *b, 1.0, *c, 0.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn one_set_per_od_pair() {
        let mut ids = IdGen::new();
        let sets = group_into_sets(
            &[member("c1", "A", "C", 5), member("c2", "A", "C", 5), member("c3", "A", "C", 5)],
            &SetPolicy::default(),
            &mut ids,
        );
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].members.len(), 3);

        let sets = group_into_sets(
            &[member("c1", "A", "C", 5), member("c2", "A", "C", 5), member("c3", "A", "D", 5)],
            &SetPolicy::default(),
            &mut ids,
        );
        assert_eq!(sets.len(), 2);
    }

    #[test]
    fn inspect_flags_damage() {
        let mut c = PiContainer::empty("x".into(), ContainerClass::standard(), "A".into());
        assert!(inspect_container(&c).passed);
        c.integrity = Integrity::Damaged;
        let r = inspect_container(&c);
        assert!(!r.passed && r.send_to_depot && r.signal_order_layer);
    }

    #[test]
    fn orphan_routed_or_held() {
        let g = graph(&["B", "Z"], &[("B", "Z", 1.0)]);
        let w = CriteriaWeights::default();
        assert!(matches!(handle_orphan(&"B".into(), &["Z".into()], &g, &w, false), Disposition::RouteTo { ref node, .. } if node.as_str() == "Z"));
        assert_eq!(handle_orphan(&"Z".into(), &["Z".into()], &g, &w, false), Disposition::Hold { node: "Z".into() });
    }

    fn depot(node: &str, stock: u32, min: u32, max: u32) -> DepotState {
        DepotState {
            node_id: node.into(),
            empty_stock: [(ClassId::Reefer, stock)].into(),
            min_level: [(ClassId::Reefer, min)].into(),
            max_level: [(ClassId::Reefer, max)].into(),
        }
    }

    #[test]
    fn all_within_band_no_orders() {
        let g = graph(&["X", "Y"], &[("X", "Y", 1.0), ("Y", "X", 1.0)]);
        let plan = reposition_empties(&[depot("X", 3, 2, 5), depot("Y", 4, 2, 5)], &g, &CriteriaWeights::default(), false);
        assert!(plan.orders.is_empty());
        assert!(plan.shortages.is_empty());
    }

    #[test]
    fn short_depot_served_by_surplus() {
        let g = graph(&["X", "Y"], &[("Y", "X", 1.0)]);
        let plan = reposition_empties(&[depot("X", 0, 2, 4), depot("Y", 10, 1, 5)], &g, &CriteriaWeights::default(), false);
        assert_eq!(plan.orders.len(), 1);
        let o = &plan.orders[0];
        assert_eq!((o.from.as_str(), o.to.as_str(), o.class), ("Y", "X", ClassId::Reefer));
        assert!(o.count >= 2);
        assert_eq!(o.count, 4);
    }

    #[test]
    fn cheaper_donor_wins() {
        let g = graph(&["X", "Y", "W"], &[("Y", "X", 9.0), ("W", "X", 2.0)]);
        let plan = reposition_empties(
            &[depot("X", 0, 2, 2), depot("Y", 10, 0, 5), depot("W", 10, 0, 5)],
            &g,
            &CriteriaWeights::default(),
            false,
        );
        assert_eq!(plan.orders.len(), 1);
        assert_eq!(plan.orders[0].from.as_str(), "W");
    }

    #[test]
    fn donors_keep_min_level() {
        let g = graph(&["X", "Y"], &[("Y", "X", 1.0)]);
        let plan = reposition_empties(&[depot("X", 0, 10, 10), depot("Y", 6, 4, 5)], &g, &CriteriaWeights::default(), false);
        assert_eq!(plan.orders[0].count, 2);
        assert_eq!(plan.shortages, vec![("X".into(), ClassId::Reefer, 8)]);
    }
}
