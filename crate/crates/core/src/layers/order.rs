//! Layer 5: dispatch notes, order building, feasibility, transactions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::container::{ContainerSet, SetMember};
use crate::domain::{Contract, Milestone};
use crate::ids::{ContainerId, DemandId, IdGen, Minutes, Money, NodeId, NoteId, OrderId};
use crate::routing::LogisticsGraph;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrderError {
    #[error("order {0} already settled")]
    DoubleSettlement(OrderId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderKind {
    Customer,
    /// Empty containers moved between depots.
    Reposition,
    /// Damaged containers sent to a depot for testing.
    DamagedReturn,
    /// Orphans sent to a disposal node.
    Disposal,
}

impl OrderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OrderKind::Customer => "customer",
            OrderKind::Reposition => "reposition",
            OrderKind::DamagedReturn => "damaged_return",
            OrderKind::Disposal => "disposal",
        }
    }

    pub fn is_internal(self) -> bool {
        self != OrderKind::Customer
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchNote {
    pub note_id: NoteId,
    pub container_id: ContainerId,
    pub consignor: NodeId,
    pub consignee: NodeId,
    pub deadline: Minutes,
    pub priority: u8,
    pub dangerous: bool,
    pub issued_at: Minutes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TxStatus {
    Open,
    Departed,
    Delivered,
    Settled,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransactionState {
    pub status: TxStatus,
    pub paid: Money,
    pub pending_milestones: Vec<Milestone>,
}

impl TransactionState {
    fn open() -> Self {
        Self {
            status: TxStatus::Open,
            paid: 0.0,
            pending_milestones: vec![Milestone::Departed, Milestone::Arrived],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TxEvent {
    Departed,
    Arrived,
    Delivered,
    Lost,
    Damaged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Order {
    pub order_id: OrderId,
    pub kind: OrderKind,
    pub notes: Vec<DispatchNote>,
    pub origin: NodeId,
    pub destination: NodeId,
    pub deadline: Minutes,
    pub transaction: TransactionState,
    pub contracts: BTreeMap<ContainerId, Contract>,
    pub created_at: Minutes,
    /// Replacement orders point at the container they replace.
    pub recovery_of: Option<ContainerId>,
}

impl Order {
    pub fn container_ids(&self) -> Vec<ContainerId> {
        self.notes.iter().map(|n| n.container_id.clone()).collect()
    }

    pub fn contract_total(&self) -> Money {
        self.contracts.values().map(|k| k.payment_total).sum()
    }

    fn milestone_total(&self, m: Milestone) -> Money {
        self.contracts.values().map(|k| k.milestone_amount(m)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderConstraints {
    /// Members whose deadlines differ by more than this go to separate orders.
    pub deadline_window: Minutes,
    pub kind: OrderKind,
    pub recovery_of: Option<ContainerId>,
}

impl Default for OrderConstraints {
    fn default() -> Self {
        Self {
            deadline_window: 1440,
            kind: OrderKind::Customer,
            recovery_of: None,
        }
    }
}

pub mod reason {
    pub const INFEASIBLE_DESTINATION: &str = "infeasible_destination";
}

#[derive(Debug, Clone, PartialEq)]
pub struct Withheld {
    pub container_id: ContainerId,
    pub code: &'static str,
    pub detail: String,
}

/// Per-container destination check done by the order layer.
fn feasibility(member: &SetMember, graph: &LogisticsGraph) -> Result<(), String> {
    let Some(dest) = graph.node(&member.destination) else {
        return Err(format!("unknown destination {}", member.destination));
    };
    if member.dangerous && !dest.accepts_dangerous {
        return Err(format!("{} does not accept dangerous material", member.destination));
    }
    if member.reefer && dest.reefer_plugs == 0 {
        return Err(format!("{} has no reefer plugs", member.destination));
    }
    Ok(())
}

/// Turns sets into orders. Infeasible customer containers are withheld and
/// reported, never dropped.
pub fn build_orders(
    sets: &[ContainerSet],
    constraints: &OrderConstraints,
    graph: &LogisticsGraph,
    now: Minutes,
    ids: &mut IdGen,
) -> (Vec<Order>, Vec<Withheld>) {
    let mut orders = Vec::new();
    let mut withheld = Vec::new();
    for set in sets {
        let mut groups: BTreeMap<Option<(DemandId, u32)>, Vec<&SetMember>> = BTreeMap::new();
        for m in &set.members {
            if constraints.kind == OrderKind::Customer {
                if let Err(detail) = feasibility(m, graph) {
                    withheld.push(Withheld {
                        container_id: m.container_id.clone(),
                        code: reason::INFEASIBLE_DESTINATION,
                        detail,
                    });
                    continue;
                }
            }
            groups.entry(m.suborder.clone()).or_default().push(m);
        }
        let plugs = graph
            .node(&set.destination)
            .map(|n| n.reefer_plugs as usize)
            .unwrap_or(0);
        for (_, mut members) in groups {
            members.sort_by(|a, b| a.deadline.cmp(&b.deadline).then_with(|| a.container_id.cmp(&b.container_id)));
            let mut current: Vec<&SetMember> = Vec::new();
            let mut reefers = 0usize;
            for m in members {
                let window_break = current
                    .first()
                    .is_some_and(|first| m.deadline - first.deadline > constraints.deadline_window);
                let plug_break = constraints.kind == OrderKind::Customer && m.reefer && reefers + 1 > plugs.max(1);
                if !current.is_empty() && (window_break || plug_break) {
                    orders.push(make_order(set, &current, constraints, now, ids));
                    current.clear();
                    reefers = 0;
                }
                if m.reefer {
                    reefers += 1;
                }
                current.push(m);
            }
            if !current.is_empty() {
                orders.push(make_order(set, &current, constraints, now, ids));
            }
        }
    }
    (orders, withheld)
}

fn make_order(
    set: &ContainerSet,
    members: &[&SetMember],
    constraints: &OrderConstraints,
    now: Minutes,
    ids: &mut IdGen,
) -> Order {
    let notes: Vec<DispatchNote> = members
        .iter()
        .map(|m| DispatchNote {
            note_id: NoteId::new(ids.next("N")),
            container_id: m.container_id.clone(),
            consignor: set.origin.clone(),
            consignee: set.destination.clone(),
            deadline: m.deadline,
            priority: m.priority,
            dangerous: m.dangerous,
            issued_at: now,
        })
        .collect();
    let contracts = members
        .iter()
        .filter_map(|m| m.contract.clone().map(|k| (m.container_id.clone(), k)))
        .collect();
    Order {
        order_id: OrderId::new(ids.next("O")),
        kind: constraints.kind,
        deadline: notes.iter().map(|n| n.deadline).min().expect("non-empty order"),
        notes,
        origin: set.origin.clone(),
        destination: set.destination.clone(),
        transaction: TransactionState::open(),
        contracts,
        created_at: now,
        recovery_of: constraints.recovery_of.clone(),
    }
}

/// Advances the transaction. Payments only ever grow; failed orders never
/// settle.
pub fn settle_transaction(order: &mut Order, event: TxEvent) -> Result<TransactionState, OrderError> {
    let tx_status = order.transaction.status;
    if tx_status == TxStatus::Settled {
        return match event {
            TxEvent::Delivered => Err(OrderError::DoubleSettlement(order.order_id.clone())),
            _ => Ok(order.transaction.clone()),
        };
    }
    if tx_status == TxStatus::Failed {
        return Ok(order.transaction.clone());
    }
    match event {
        TxEvent::Departed | TxEvent::Arrived => {
            let milestone = if event == TxEvent::Departed {
                Milestone::Departed
            } else {
                Milestone::Arrived
            };
            if let Some(pos) = order.transaction.pending_milestones.iter().position(|m| *m == milestone) {
                order.transaction.pending_milestones.remove(pos);
                order.transaction.paid += order.milestone_total(milestone);
            }
            order.transaction.status = if event == TxEvent::Departed {
                TxStatus::Departed
            } else {
                TxStatus::Delivered
            };
        }
        TxEvent::Delivered => {
            order.transaction.pending_milestones.clear();
            order.transaction.paid = order.transaction.paid.max(order.contract_total());
            order.transaction.status = TxStatus::Settled;
        }
        TxEvent::Lost | TxEvent::Damaged => {
            order.transaction.status = TxStatus::Failed;
        }
    }
    Ok(order.transaction.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::MilestonePayment;
    use crate::routing::{NodeAttrs, NodeKind};

    fn graph(accepts_dangerous: bool, plugs: u32) -> LogisticsGraph {
        LogisticsGraph::from_parts(
            ["A", "C"]
                .iter()
                .map(|n| NodeAttrs {
                    node_id: (*n).into(),
                    kind: NodeKind::Hub,
                    accepts_dangerous,
                    reefer_plugs: plugs,
                    is_container_depot: false,
                })
                .collect(),
            vec![],
        )
        .unwrap()
    }

    fn member(id: &str, deadline: Minutes) -> SetMember {
        SetMember {
            container_id: id.into(),
            origin: "A".into(),
            destination: "C".into(),
            deadline,
            priority: 1,
            dangerous: false,
            reefer: false,
            suborder: None,
            contract: Some(Contract {
                contract_id: format!("K-{id}").into(),
                consignor: "A".into(),
                consignee: "C".into(),
                product_code: "P".into(),
                quantity: 1,
                deadline,
                priority: 1,
                payment_total: 100.0,
                intermediate_payments: vec![MilestonePayment {
                    milestone: Milestone::Departed,
                    amount: 30.0,
                }],
            }),
        }
    }

    fn set(members: Vec<SetMember>) -> ContainerSet {
        ContainerSet {
            set_id: "SET1".into(),
            origin: "A".into(),
            destination: "C".into(),
            members,
        }
    }

    #[test]
    fn same_deadline_one_order() {
        let mut ids = IdGen::new();
        let (orders, withheld) = build_orders(
            &[set(vec![member("c1", 100), member("c2", 100), member("c3", 100)])],
            &OrderConstraints::default(),
            &graph(true, 0),
            0,
            &mut ids,
        );
        assert!(withheld.is_empty());
        assert_eq!(orders.len(), 1);
        assert_eq!(orders[0].notes.len(), 3);
        assert_eq!(orders[0].transaction.status, TxStatus::Open);
    }

    #[test]
    fn deadline_window_splits() {
        let mut ids = IdGen::new();
        let (orders, _) = build_orders(
            &[set(vec![member("c1", 1440), member("c2", 5 * 1440)])],
            &OrderConstraints::default(),
            &graph(true, 0),
            0,
            &mut ids,
        );
        assert_eq!(orders.len(), 2);
        assert_eq!(orders[0].deadline, 1440);
    }

    #[test]
    fn suborder_boundary_splits() {
        let mut ids = IdGen::new();
        let mut a = member("c1", 100);
        a.suborder = Some(("d".into(), 0));
        let mut b = member("c2", 100);
        b.suborder = Some(("d".into(), 1));
        let (orders, _) = build_orders(&[set(vec![a, b])], &OrderConstraints::default(), &graph(true, 0), 0, &mut ids);
        assert_eq!(orders.len(), 2);
    }

    #[test]
    fn dangerous_to_refusing_node_withheld() {
        let mut ids = IdGen::new();
        let mut m = member("c1", 100);
        m.dangerous = true;
        let (orders, withheld) = build_orders(&[set(vec![m, member("c2", 100)])], &OrderConstraints::default(), &graph(false, 0), 0, &mut ids);
        assert_eq!(withheld.len(), 1);
        assert_eq!(withheld[0].code, reason::INFEASIBLE_DESTINATION);
        assert_eq!(orders.len(), 1);
        assert_eq!(orders[0].container_ids(), vec![ContainerId::from("c2")]);
    }

    #[test]
    fn reefers_capped_by_plugs_per_order() {
        let mut ids = IdGen::new();
        let ms: Vec<SetMember> = (0..3)
            .map(|i| {
                let mut m = member(&format!("r{i}"), 100);
                m.reefer = true;
                m
            })
            .collect();
        let (orders, _) = build_orders(&[set(ms)], &OrderConstraints::default(), &graph(true, 2), 0, &mut ids);
        assert_eq!(orders.iter().map(|o| o.notes.len()).collect::<Vec<_>>(), vec![2, 1]);
    }

    fn one_order() -> Order {
        let mut ids = IdGen::new();
        build_orders(&[set(vec![member("c1", 100)])], &OrderConstraints::default(), &graph(true, 0), 0, &mut ids)
            .0
            .remove(0)
    }

    #[test]
    fn milestone_then_settle() {
        let mut o = one_order();
        assert_eq!(settle_transaction(&mut o, TxEvent::Departed).unwrap().paid, 30.0);
        let s = settle_transaction(&mut o, TxEvent::Delivered).unwrap();
        assert_eq!(s.paid, 100.0);
        assert_eq!(s.status, TxStatus::Settled);
    }

    #[test]
    fn lost_after_departed_fails() {
        let mut o = one_order();
        settle_transaction(&mut o, TxEvent::Departed).unwrap();
        let s = settle_transaction(&mut o, TxEvent::Lost).unwrap();
        assert_eq!((s.status, s.paid), (TxStatus::Failed, 30.0));
        let s = settle_transaction(&mut o, TxEvent::Delivered).unwrap();
        assert_eq!(s.status, TxStatus::Failed);
    }

    #[test]
    fn double_settlement_rejected() {
        let mut o = one_order();
        settle_transaction(&mut o, TxEvent::Delivered).unwrap();
        assert!(matches!(settle_transaction(&mut o, TxEvent::Delivered), Err(OrderError::DoubleSettlement(_))));
    }
}
