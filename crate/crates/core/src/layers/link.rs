//! Layer 2: shipments, mean allocation, custody handover and fault handling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{MeanState, PiMean};
use crate::ids::{BlockId, CarrierId, ContainerId, IdGen, MeanId, Minutes, NodeId, ShipmentId};
use crate::routing::Hop;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("shipment {shipment} is at {actual}, not {expected}")]
    NotAtNode {
        shipment: ShipmentId,
        expected: NodeId,
        actual: NodeId,
    },
    #[error("handover to the same operator {0}")]
    SameOperator(CarrierId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShipmentState {
    Allocated,
    Moving,
    Done,
    Faulted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Shipment {
    pub shipment_id: ShipmentId,
    pub parent_block: BlockId,
    pub container_ids: Vec<ContainerId>,
    pub step: Hop,
    pub assigned_mean: MeanId,
    pub operator: CarrierId,
    pub state: ShipmentState,
}

/// Shipments that got a mean, plus the containers still waiting for one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ShipmentPlan {
    pub shipments: Vec<Shipment>,
    pub waiting: Vec<ContainerId>,
}

/// Can this mean take a step starting at `from` right now?
pub fn mean_available(mean: &PiMean, from: &NodeId) -> bool {
    mean.state == MeanState::Idle && &mean.location == from && !mean.kind.is_handling_gear()
}

/// First-fit-decreasing by gross weight over idle conveyances at the hop's
/// origin, taken in ascending mean id. Containers that fit nowhere wait.
pub fn build_shipments(
    block: &BlockId,
    hop: &Hop,
    containers: &[(ContainerId, f64)],
    means: &[PiMean],
    ids: &mut IdGen,
) -> ShipmentPlan {
    let mut order: Vec<&(ContainerId, f64)> = containers.iter().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut candidates: Vec<&PiMean> = means.iter().filter(|m| mean_available(m, &hop.edge.from)).collect();
    candidates.sort_by(|a, b| a.mean_id.cmp(&b.mean_id));

    let mut bins: Vec<(Vec<ContainerId>, f64)> = vec![(Vec::new(), 0.0); candidates.len()];
    let mut waiting = Vec::new();
    for (id, weight) in order {
        let slot = bins.iter_mut().zip(&candidates).find(|((cs, w), m)| {
            cs.len() < m.container_capacity as usize && *w + weight <= m.max_total_weight
        });
        match slot {
            Some(((cs, w), _)) => {
                cs.push(id.clone());
                *w += weight;
            }
            None => waiting.push(id.clone()),
        }
    }
    let shipments = bins
        .into_iter()
        .zip(candidates)
        .filter(|((cs, _), _)| !cs.is_empty())
        .map(|((cs, _), m)| Shipment {
            shipment_id: ShipmentId::new(ids.next("S")),
            parent_block: block.clone(),
            container_ids: cs,
            step: hop.clone(),
            assigned_mean: m.mean_id.clone(),
            operator: m.operator.clone(),
            state: ShipmentState::Allocated,
        })
        .collect();
    waiting.sort();
    ShipmentPlan { shipments, waiting }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverRecord {
    pub shipment_id: ShipmentId,
    pub from_operator: CarrierId,
    pub to_operator: CarrierId,
    pub at_node: NodeId,
    pub time: Minutes,
}

/// Custody passes from `from_operator` to the shipment's operator at the
/// node the shipment leaves from.
pub fn record_handover(
    shipment: &Shipment,
    from_operator: &CarrierId,
    at_node: &NodeId,
    time: Minutes,
) -> Result<HandoverRecord, LinkError> {
    if &shipment.step.edge.from != at_node {
        return Err(LinkError::NotAtNode {
            shipment: shipment.shipment_id.clone(),
            expected: at_node.clone(),
            actual: shipment.step.edge.from.clone(),
        });
    }
    if from_operator == &shipment.operator {
        return Err(LinkError::SameOperator(from_operator.clone()));
    }
    Ok(HandoverRecord {
        shipment_id: shipment.shipment_id.clone(),
        from_operator: from_operator.clone(),
        to_operator: shipment.operator.clone(),
        at_node: at_node.clone(),
        time,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanFaultKind {
    Breakdown,
    Delay { extra_minutes: Minutes },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanFault {
    pub mean_id: MeanId,
    pub kind: MeanFaultKind,
    pub at_time: Minutes,
}

impl MeanFault {
    pub fn validate(&self) -> Result<(), String> {
        match self.kind {
            MeanFaultKind::Delay { extra_minutes: 0 } => Err("delay extra_minutes must be > 0".into()),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinkAction {
    /// Push the arrival back.
    Postpone { extra_minutes: Minutes },
    /// The step restarts on other means; some containers may still wait.
    Reallocate(ShipmentPlan),
    /// No mean can take over here; the network layer must decide.
    Escalate,
}

/// Physical handling reports, the link layer decides.
pub fn handle_mean_fault(
    shipment: &Shipment,
    fault: &MeanFault,
    means: &[PiMean],
    weights: &BTreeMap<ContainerId, f64>,
    ids: &mut IdGen,
) -> LinkAction {
    match fault.kind {
        MeanFaultKind::Delay { extra_minutes } => LinkAction::Postpone { extra_minutes },
        MeanFaultKind::Breakdown => {
            let others: Vec<PiMean> = means.iter().filter(|m| m.mean_id != fault.mean_id).cloned().collect();
            let cs: Vec<(ContainerId, f64)> = shipment
                .container_ids
                .iter()
                .map(|c| (c.clone(), weights.get(c).copied().unwrap_or(0.0)))
                .collect();
            let plan = build_shipments(&shipment.parent_block, &shipment.step, &cs, &others, ids);
            if plan.shipments.is_empty() {
                LinkAction::Escalate
            } else {
                LinkAction::Reallocate(plan)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::MeanKind;
    use crate::routing::{EdgeAttrs, Mode};

    pub(crate) fn mean(id: &str, cap: u32, at: &str, op: &str) -> PiMean {
        PiMean {
            mean_id: id.into(),
            kind: MeanKind::Truck,
            container_capacity: cap,
            max_total_weight: 1e9,
            speed: 1.0,
            home_node: at.into(),
            operator: op.into(),
            state: MeanState::Idle,
            location: at.into(),
        }
    }

    fn hop() -> Hop {
        Hop {
            edge: EdgeAttrs::new("A", "B", 10.0, 1.0, 0.0),
            mode: Mode::Normal,
        }
    }

    fn boxes(n: usize) -> Vec<(ContainerId, f64)> {
        (0..n).map(|i| (format!("c{i:02}").into(), 1000.0 + i as f64)).collect()
    }

    #[test]
    fn one_mean_one_shipment() {
        let mut ids = IdGen::new();
        let p = build_shipments(&"B1".into(), &hop(), &boxes(6), &[mean("m1", 10, "A", "X")], &mut ids);
        assert_eq!(p.shipments.len(), 1);
        assert_eq!(p.shipments[0].container_ids.len(), 6);
        assert!(p.waiting.is_empty());
    }

    #[test]
    fn ffd_ten_and_two() {
        let mut ids = IdGen::new();
        let means = [mean("m2", 5, "A", "X"), mean("m1", 10, "A", "X")];
        let p = build_shipments(&"B1".into(), &hop(), &boxes(12), &means, &mut ids);
        let sizes: Vec<usize> = p.shipments.iter().map(|s| s.container_ids.len()).collect();
        assert_eq!(sizes, vec![10, 2]);
        assert_eq!(p.shipments[0].assigned_mean.as_str(), "m1");
        // heaviest go first
        assert_eq!(p.shipments[0].container_ids[0].as_str(), "c11");
    }

    #[test]
    fn no_idle_mean_all_wait() {
        let mut ids = IdGen::new();
        let mut busy = mean("m1", 10, "A", "X");
        busy.state = MeanState::Busy;
        let elsewhere = mean("m2", 10, "Q", "X");
        let p = build_shipments(&"B1".into(), &hop(), &boxes(3), &[busy, elsewhere], &mut ids);
        assert!(p.shipments.is_empty());
        assert_eq!(p.waiting.len(), 3);
    }

    #[test]
    fn weight_limit_respected() {
        let mut ids = IdGen::new();
        let mut m = mean("m1", 10, "A", "X");
        m.max_total_weight = 2500.0;
        let p = build_shipments(&"B1".into(), &hop(), &boxes(3), &[m], &mut ids);
        assert_eq!(p.shipments[0].container_ids.len(), 2);
        assert_eq!(p.waiting, vec![ContainerId::from("c00")]);
    }

    fn shipment(op: &str) -> Shipment {
        let mut ids = IdGen::new();
        build_shipments(&"B1".into(), &hop(), &boxes(2), &[mean("m1", 10, "A", op)], &mut ids)
            .shipments
            .remove(0)
    }

    #[test]
    fn handover_between_carriers() {
        let r = record_handover(&shipment("Y"), &"X".into(), &"A".into(), 5).unwrap();
        assert_eq!((r.from_operator.as_str(), r.to_operator.as_str()), ("X", "Y"));
        assert_eq!(
            record_handover(&shipment("X"), &"X".into(), &"A".into(), 5),
            Err(LinkError::SameOperator("X".into()))
        );
        assert!(matches!(
            record_handover(&shipment("Y"), &"X".into(), &"B".into(), 5),
            Err(LinkError::NotAtNode { .. })
        ));
    }

    #[test]
    fn fault_actions() {
        let mut ids = IdGen::new();
        let s = shipment("X");
        let w = BTreeMap::new();
        let delay = MeanFault {
            mean_id: "m1".into(),
            kind: MeanFaultKind::Delay { extra_minutes: 60 },
            at_time: 3,
        };
        assert_eq!(
            handle_mean_fault(&s, &delay, &[], &w, &mut ids),
            LinkAction::Postpone { extra_minutes: 60 }
        );
        let brk = MeanFault {
            kind: MeanFaultKind::Breakdown,
            ..delay
        };
        let spare = mean("m9", 5, "A", "Z");
        match handle_mean_fault(&s, &brk, &[mean("m1", 10, "A", "X"), spare], &w, &mut ids) {
            LinkAction::Reallocate(p) => assert_eq!(p.shipments[0].assigned_mean.as_str(), "m9"),
            other => panic!("{other:?}"),
        }
        assert_eq!(handle_mean_fault(&s, &brk, &[mean("m1", 10, "A", "X")], &w, &mut ids), LinkAction::Escalate);
    }

    #[test]
    fn zero_delay_invalid() {
        let f = MeanFault {
            mean_id: "m".into(),
            kind: MeanFaultKind::Delay { extra_minutes: 0 },
            at_time: 0,
        };
        assert!(f.validate().is_err());
    }
}
