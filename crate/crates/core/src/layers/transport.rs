//! Layer 4: loads, end-to-end trip tracking, deadlines and loss recovery.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::order::{Order, OrderKind};
use crate::domain::{Contract, PiContainer};
use crate::ids::{ContainerId, IdGen, LoadId, Minutes, Money, NodeId, OrderId};
use crate::report::CheckReport;
use crate::routing::LogisticsGraph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("load {load}: {event} while {status:?}")]
    OutOfOrderEvent {
        load: LoadId,
        event: String,
        status: LoadStatus,
    },
    #[error("consignor {0} no longer exists")]
    Unrecoverable(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadStatus {
    Pending,
    Departed,
    InTransit,
    Arrived,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Load {
    pub load_id: LoadId,
    pub kind: OrderKind,
    pub member_orders: Vec<OrderId>,
    pub container_ids: Vec<ContainerId>,
    pub origin: NodeId,
    pub destination: NodeId,
    pub deadline: Minutes,
    pub status: LoadStatus,
    pub location: NodeId,
}

pub mod reason {
    pub const UNKNOWN_DESTINATION: &str = "unknown_destination";
    pub const REFUSES_DANGEROUS: &str = "refuses_dangerous";
    pub const INSUFFICIENT_REEFER_PLUGS: &str = "insufficient_reefer_plugs";
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadLimits {
    pub max_load_size: usize,
}

impl Default for LoadLimits {
    fn default() -> Self {
        Self { max_load_size: 20 }
    }
}

struct Piece<'a> {
    order: &'a Order,
    containers: Vec<ContainerId>,
    reefers: usize,
}

/// Packs whole orders into loads, first-fit in deadline order. Only orders
/// bigger than `max_load_size` are cut, so only they span several loads.
/// Reefer count per customer load is capped by the destination's plugs.
pub fn build_loads(
    orders: &[Order],
    limits: &LoadLimits,
    graph: &LogisticsGraph,
    reefers: &BTreeSet<ContainerId>,
    ids: &mut IdGen,
) -> Vec<Load> {
    let max = limits.max_load_size.max(1);
    let mut groups: BTreeMap<(NodeId, NodeId, OrderKind), Vec<&Order>> = BTreeMap::new();
    for o in orders {
        groups
            .entry((o.origin.clone(), o.destination.clone(), o.kind))
            .or_default()
            .push(o);
    }
    let mut loads = Vec::new();
    for ((origin, destination, kind), mut group) in groups {
        group.sort_by(|a, b| a.deadline.cmp(&b.deadline).then_with(|| a.order_id.cmp(&b.order_id)));
        let reefer_cap = if kind == OrderKind::Customer {
            graph.node(&destination).map_or(0, |n| n.reefer_plugs as usize)
        } else {
            usize::MAX
        };
        let mut pieces = Vec::new();
        for order in group {
            for chunk in order.container_ids().chunks(max) {
                pieces.push(Piece {
                    order,
                    containers: chunk.to_vec(),
                    reefers: chunk.iter().filter(|c| reefers.contains(*c)).count(),
                });
            }
        }
        let mut bins: Vec<(Vec<&Order>, Vec<ContainerId>, usize)> = Vec::new();
        for piece in pieces {
            let slot = bins.iter_mut().find(|(_, cs, r)| {
                cs.len() + piece.containers.len() <= max && *r + piece.reefers <= reefer_cap.max(piece.reefers)
            });
            match slot {
                Some((members, cs, r)) => {
                    if !members.iter().any(|m| m.order_id == piece.order.order_id) {
                        members.push(piece.order);
                    }
                    cs.extend(piece.containers);
                    *r += piece.reefers;
                }
                None => bins.push((vec![piece.order], piece.containers, piece.reefers)),
            }
        }
        for (members, containers, _) in bins {
            loads.push(Load {
                load_id: LoadId::new(ids.next("L")),
                kind,
                deadline: members.iter().map(|o| o.deadline).min().expect("non-empty"),
                member_orders: members.iter().map(|o| o.order_id.clone()).collect(),
                container_ids: containers,
                origin: origin.clone(),
                destination: destination.clone(),
                status: LoadStatus::Pending,
                location: origin.clone(),
            });
        }
    }
    loads
}

/// Can the destination take this load? A guard behind the order layer's
/// own check.
pub fn admit_destination(load: &Load, graph: &LogisticsGraph, containers: &BTreeMap<ContainerId, PiContainer>) -> CheckReport {
    let mut report = CheckReport::new();
    let Some(dest) = graph.node(&load.destination) else {
        report.fail(reason::UNKNOWN_DESTINATION, format!("{} not in graph", load.destination));
        return report;
    };
    let members: Vec<&PiContainer> = load.container_ids.iter().filter_map(|c| containers.get(c)).collect();
    if !dest.accepts_dangerous && members.iter().any(|c| c.is_dangerous()) {
        report.fail(reason::REFUSES_DANGEROUS, format!("{} refuses dangerous material", dest.node_id));
    }
    let reefers = members
        .iter()
        .filter(|c| c.is_filled() && c.class.class_id == crate::domain::ClassId::Reefer)
        .count();
    if reefers > dest.reefer_plugs as usize {
        report.fail(
            reason::INSUFFICIENT_REEFER_PLUGS,
            format!("{reefers} reefers > {} plugs at {}", dest.reefer_plugs, dest.node_id),
        );
    }
    report
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrackEvent {
    Departed,
    HopCompleted(NodeId),
    Arrived,
    Exception(String),
}

/// Upward notifications for the order layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpSignal {
    Departed,
    Location(NodeId),
    Arrived,
    Exception(String),
}

pub fn track(load: &mut Load, event: &TrackEvent) -> Result<Vec<UpSignal>, TransportError> {
    use LoadStatus::*;
    let bad = |load: &Load, name: &str| TransportError::OutOfOrderEvent {
        load: load.load_id.clone(),
        event: name.to_owned(),
        status: load.status,
    };
    match event {
        TrackEvent::Departed => {
            if load.status != Pending {
                return Err(bad(load, "departed"));
            }
            load.status = Departed;
            Ok(vec![UpSignal::Departed])
        }
        TrackEvent::HopCompleted(node) => {
            if !matches!(load.status, Departed | InTransit) {
                return Err(bad(load, "hop_completed"));
            }
            load.status = InTransit;
            load.location = node.clone();
            Ok(vec![UpSignal::Location(node.clone())])
        }
        TrackEvent::Arrived => {
            if !matches!(load.status, Departed | InTransit) {
                return Err(bad(load, "arrived"));
            }
            load.status = Arrived;
            load.location = load.destination.clone();
            Ok(vec![UpSignal::Arrived])
        }
        TrackEvent::Exception(why) => {
            if matches!(load.status, Arrived | Failed) {
                return Err(bad(load, "exception"));
            }
            Ok(vec![UpSignal::Exception(why.clone())])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub deadline: Minutes,
    pub arrival: Option<Minutes>,
    pub late: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeadlineLedger {
    pub entries: BTreeMap<LoadId, LedgerEntry>,
}

impl DeadlineLedger {
    pub fn register(&mut self, load: &LoadId, deadline: Minutes) {
        self.entries.insert(
            load.clone(),
            LedgerEntry {
                deadline,
                arrival: None,
                late: false,
            },
        );
    }

    /// Returns the late flag.
    pub fn record_arrival(&mut self, load: &LoadId, at: Minutes) -> Option<bool> {
        let e = self.entries.get_mut(load)?;
        e.arrival = Some(at);
        e.late = at > e.deadline;
        Some(e.late)
    }

    pub fn remove(&mut self, load: &LoadId) {
        self.entries.remove(load);
    }
}

/// Late arrivals plus pending loads already past their deadline.
pub fn check_deadlines(ledger: &DeadlineLedger, now: Minutes) -> Vec<LoadId> {
    ledger
        .entries
        .iter()
        .filter(|(_, e)| match e.arrival {
            Some(_) => e.late,
            None => now > e.deadline,
        })
        .map(|(id, _)| id.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InventoryItem {
    pub container_id: ContainerId,
    pub product_code: String,
    pub quantity: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecoveryKind {
    /// Ship an already filled container with the same goods.
    Resend { spare: ContainerId },
    /// Fill a new container after `delay` minutes.
    Reorder { delay: Minutes },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryAction {
    pub lost: ContainerId,
    pub kind: RecoveryKind,
    pub extra_cost: Money,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryPolicy {
    pub reorder_delay: Minutes,
    pub loss_penalty: Money,
}

impl Default for RecoveryPolicy {
    fn default() -> Self {
        Self {
            reorder_delay: 2880,
            loss_penalty: 10.0,
        }
    }
}

/// Lost goods cannot simply be retransmitted: a matching full container must
/// exist at the consignor, else new goods are ordered. Either way it costs.
pub fn recover_loss(
    lost: &ContainerId,
    contract: &Contract,
    inventory: &[InventoryItem],
    graph: &LogisticsGraph,
    reship_score: f64,
    policy: &RecoveryPolicy,
) -> Result<RecoveryAction, TransportError> {
    if !graph.contains(&contract.consignor) {
        return Err(TransportError::Unrecoverable(contract.consignor.clone()));
    }
    let extra_cost = reship_score.max(0.0) + policy.loss_penalty;
    let spare = inventory
        .iter()
        .filter(|i| i.product_code == contract.product_code && i.quantity == contract.quantity)
        .map(|i| i.container_id.clone())
        .min();
    let kind = match spare {
        Some(spare) => RecoveryKind::Resend { spare },
        None => RecoveryKind::Reorder {
            delay: policy.reorder_delay,
        },
    };
    Ok(RecoveryAction {
        lost: lost.clone(),
        kind,
        extra_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ContainerClass, Product};
    use crate::layers::order::{build_orders, OrderConstraints};
    use crate::layers::container::{ContainerSet, SetMember};
    use crate::routing::{NodeAttrs, NodeKind};

    fn graph(plugs: u32) -> LogisticsGraph {
        LogisticsGraph::from_parts(
            ["A", "C", "Z"]
                .iter()
                .map(|n| NodeAttrs {
                    node_id: (*n).into(),
                    kind: NodeKind::Hub,
                    accepts_dangerous: true,
                    reefer_plugs: plugs,
                    is_container_depot: false,
                })
                .collect(),
            vec![],
        )
        .unwrap()
    }

    fn orders(sizes: &[(usize, Minutes)], ids: &mut IdGen) -> Vec<Order> {
        let mut out = Vec::new();
        let mut n = 0;
        for (size, deadline) in sizes {
            let members = (0..*size)
                .map(|_| {
                    n += 1;
                    SetMember {
                        container_id: format!("c{n:02}").into(),
                        origin: "A".into(),
                        destination: "C".into(),
                        deadline: *deadline,
                        priority: 1,
                        dangerous: false,
                        reefer: false,
                        suborder: None,
                        contract: None,
                    }
                })
                .collect();
            let set = ContainerSet {
                set_id: "S".into(),
                origin: "A".into(),
                destination: "C".into(),
                members,
            };
            out.extend(build_orders(&[set], &OrderConstraints::default(), &graph(4), 0, ids).0);
        }
        out
    }

    #[test]
    fn small_orders_share_a_load() {
        let mut ids = IdGen::new();
        let os = orders(&[(2, 100), (2, 100), (2, 100)], &mut ids);
        let loads = build_loads(&os, &LoadLimits { max_load_size: 10 }, &graph(0), &BTreeSet::new(), &mut ids);
        assert_eq!(loads.len(), 1);
        assert_eq!(loads[0].container_ids.len(), 6);
    }

    #[test]
    fn first_fit_by_deadline() {
        let mut ids = IdGen::new();
        // latest-deadline order listed first; it must end up alone
        let os = orders(&[(4, 300), (4, 100), (4, 200)], &mut ids);
        let loads = build_loads(&os, &LoadLimits { max_load_size: 8 }, &graph(0), &BTreeSet::new(), &mut ids);
        let sizes: Vec<usize> = loads.iter().map(|l| l.container_ids.len()).collect();
        assert_eq!(sizes, vec![8, 4]);
        assert_eq!(loads[0].deadline, 100);
        assert_eq!(loads[1].deadline, 300);
    }

    #[test]
    fn oversized_order_split() {
        let mut ids = IdGen::new();
        let os = orders(&[(12, 100)], &mut ids);
        let loads = build_loads(&os, &LoadLimits { max_load_size: 5 }, &graph(0), &BTreeSet::new(), &mut ids);
        assert_eq!(loads.iter().map(|l| l.container_ids.len()).collect::<Vec<_>>(), vec![5, 5, 2]);
        assert!(loads.iter().all(|l| l.member_orders == vec![os[0].order_id.clone()]));
    }

    #[test]
    fn empty_input() {
        let mut ids = IdGen::new();
        assert!(build_loads(&[], &LoadLimits::default(), &graph(0), &BTreeSet::new(), &mut ids).is_empty());
    }

    fn reefer(id: &str) -> PiContainer {
        let p = Product {
            product_code: "F".into(),
            description: String::new(),
            quantity: 1,
            unit_weight: 10.0,
            unit_volume: 1.0,
            perishable: true,
            fragile: false,
            dangerous: false,
        };
        PiContainer::builder(id, ContainerClass::reefer(), "A").contents(p).build().unwrap()
    }

    fn load_of(ids: &[&str], dest: &str) -> Load {
        Load {
            load_id: "L1".into(),
            kind: OrderKind::Customer,
            member_orders: vec!["O1".into()],
            container_ids: ids.iter().map(|s| (*s).into()).collect(),
            origin: "A".into(),
            destination: dest.into(),
            deadline: 100,
            status: LoadStatus::Pending,
            location: "A".into(),
        }
    }

    #[test]
    fn admit_counts_reefer_plugs() {
        let cs: BTreeMap<ContainerId, PiContainer> = ["r1", "r2", "r3"].iter().map(|i| ((*i).into(), reefer(i))).collect();
        let r = admit_destination(&load_of(&["r1", "r2", "r3"], "C"), &graph(2), &cs);
        assert!(r.has(reason::INSUFFICIENT_REEFER_PLUGS));
        assert!(admit_destination(&load_of(&["r1", "r2"], "C"), &graph(2), &cs).passed());
        assert!(admit_destination(&load_of(&["r1"], "Q"), &graph(2), &cs).has(reason::UNKNOWN_DESTINATION));
    }

    #[test]
    fn track_order_enforced() {
        let mut l = load_of(&["x"], "C");
        assert!(track(&mut l, &TrackEvent::Arrived).is_err());
        assert_eq!(track(&mut l, &TrackEvent::Departed).unwrap(), vec![UpSignal::Departed]);
        track(&mut l, &TrackEvent::HopCompleted("Z".into())).unwrap();
        assert_eq!(l.location.as_str(), "Z");
        track(&mut l, &TrackEvent::Arrived).unwrap();
        assert_eq!(l.status, LoadStatus::Arrived);
        assert!(track(&mut l, &TrackEvent::Departed).is_err());
    }

    #[test]
    fn ledger_late_flags() {
        let mut ledger = DeadlineLedger::default();
        ledger.register(&"L1".into(), 200);
        ledger.register(&"L2".into(), 200);
        ledger.register(&"L3".into(), 200);
        assert_eq!(ledger.record_arrival(&"L1".into(), 100), Some(false));
        assert_eq!(ledger.record_arrival(&"L2".into(), 250), Some(true));
        assert_eq!(check_deadlines(&ledger, 150), vec![LoadId::from("L2")]);
        assert_eq!(check_deadlines(&ledger, 201), vec![LoadId::from("L2"), "L3".into()]);
    }

    fn contract() -> Contract {
        Contract {
            contract_id: "K".into(),
            consignor: "A".into(),
            consignee: "C".into(),
            product_code: "P".into(),
            quantity: 5,
            deadline: 10,
            priority: 1,
            payment_total: 1.0,
            intermediate_payments: vec![],
        }
    }

    #[test]
    fn resend_when_stock_matches() {
        let inv = vec![InventoryItem {
            container_id: "spare".into(),
            product_code: "P".into(),
            quantity: 5,
        }];
        let a = recover_loss(&"x".into(), &contract(), &inv, &graph(0), 7.0, &RecoveryPolicy::default()).unwrap();
        assert_eq!(a.kind, RecoveryKind::Resend { spare: "spare".into() });
        assert_eq!(a.extra_cost, 17.0);
    }

    #[test]
    fn reorder_without_stock_and_cost_positive_on_free_graph() {
        let inv = vec![InventoryItem {
            container_id: "spare".into(),
            product_code: "P".into(),
            quantity: 4,
        }];
        let a = recover_loss(&"x".into(), &contract(), &inv, &graph(0), 0.0, &RecoveryPolicy::default()).unwrap();
        assert_eq!(a.kind, RecoveryKind::Reorder { delay: 2880 });
        assert!(a.extra_cost > 0.0);
    }

    #[test]
    fn missing_consignor_unrecoverable() {
        let mut k = contract();
        k.consignor = "GONE".into();
        assert!(matches!(
            recover_loss(&"x".into(), &k, &[], &graph(0), 0.0, &RecoveryPolicy::default()),
            Err(TransportError::Unrecoverable(_))
        ));
    }
}
