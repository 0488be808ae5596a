//! Layers 4 and 3: loads, deadlines and loss recovery; blocks and routes.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use super::{json_list, Msg, RecoveryStep, Simulation};
use crate::domain::{ClassId, Integrity};
use crate::ids::{BlockId, ContainerId, LoadId};
use crate::kernel::KernelError;
use crate::layers::network::{build_blocks, reroute, route_block, RerouteOutcome};
use crate::layers::order::{Order, OrderKind, TxStatus};
use crate::layers::transport::{
    admit_destination, build_loads, recover_loss, track, InventoryItem, LoadLimits, LoadStatus, RecoveryKind, RecoveryPolicy, TrackEvent,
};
use crate::routing::{route_cost, shortest_path_scalarized, Route};

impl Simulation<'_> {
    // ---- layer 4 ----

    pub(super) fn l4(&mut self, msg: Msg) -> Result<(), KernelError> {
        match msg {
            Msg::Orders { orders } => self.make_loads(orders),
            Msg::BlockDeparted { block } => {
                let Some(b) = self.blocks.get(&block) else { return Ok(()) };
                let mut departed = Vec::new();
                for l in b.parent_loads.clone() {
                    let load = self.loads.get_mut(&l).expect("load");
                    if load.status != LoadStatus::Pending {
                        continue;
                    }
                    track(load, &TrackEvent::Departed).map_err(|e| KernelError::OutOfOrder(e.to_string()))?;
                    departed.extend(load.member_orders.clone());
                    let ev = self.tr(4, "load_departed").subject(&l);
                    self.emit(ev);
                }
                if departed.is_empty() {
                    return Ok(());
                }
                self.up(Msg::OrdersDeparted { orders: departed })
            }
            Msg::BlockArrived { block } => {
                let b = self.blocks[&block].clone();
                for l in &b.parent_loads {
                    self.load_last_arrival.insert(l.clone(), self.now());
                    let arrived = self.load_arrived.entry(l.clone()).or_default();
                    for c in &b.container_ids {
                        if self.container_load.get(c) == Some(l) {
                            arrived.insert(c.clone());
                        }
                    }
                    self.close_load(l)?;
                }
                let ev = self.tr(4, "block_delivered").subject(&block).detail("containers", json_list(&b.container_ids));
                self.emit(ev);
                if b.container_ids.is_empty() {
                    return Ok(());
                }
                self.up(Msg::Arrived {
                    containers: b.container_ids.clone(),
                })
            }
            Msg::BlockException { block, reason } => {
                let loads = self.blocks.get(&block).map(|b| b.parent_loads.clone()).unwrap_or_default();
                for l in loads {
                    let load = self.loads.get_mut(&l).expect("load");
                    if track(load, &TrackEvent::Exception(reason.clone())).is_ok() {
                        let ev = self.tr(4, "load_exception").subject(&l).detail("block", block.as_str()).detail("reason", reason.as_str());
                        self.emit(ev);
                    }
                }
                Ok(())
            }
            Msg::LossNotice { container } => {
                if let Some(l) = self.container_load.get(&container).cloned() {
                    self.close_load(&l)?;
                }
                let open = self
                    .order_of(&container)
                    .is_some_and(|o| !matches!(o.transaction.status, TxStatus::Settled | TxStatus::Failed));
                if !open {
                    return Ok(());
                }
                self.up(Msg::LostSignal {
                    containers: vec![container.clone()],
                })?;
                if self.kind_of(&container) == OrderKind::Customer {
                    self.recover(&container)?;
                }
                Ok(())
            }
            Msg::Recover { container } => {
                let Some(consignor) = self.order_of(&container).map(|o| o.origin.clone()) else {
                    return Ok(());
                };
                if consignor == self.here() {
                    self.recover(&container)
                } else {
                    self.send_to_peer(&consignor, Msg::RecoverLoss { container })
                }
            }
            Msg::RecoverLoss { container } => self.recover(&container),
            other => Err(self.abort(format!("L4 got {}", other.name()))),
        }
    }

    fn make_loads(&mut self, orders: Vec<crate::ids::OrderId>) -> Result<(), KernelError> {
        // Containers lost between order and load stay out.
        let live: Vec<Order> = orders
            .iter()
            .map(|o| {
                let mut o = self.orders[o].clone();
                o.notes.retain(|n| self.bucket.get(&n.container_id) != Some(&super::Bucket::Lost));
                o
            })
            .filter(|o| !o.notes.is_empty())
            .collect();
        let reefers: BTreeSet<ContainerId> = live
            .iter()
            .flat_map(Order::container_ids)
            .filter(|c| self.class_of(c).class_id == ClassId::Reefer)
            .collect();
        let limits = LoadLimits {
            max_load_size: self.params.max_load_size,
        };
        let loads = build_loads(&live, &limits, &self.graph, &reefers, &mut self.ids);
        let mut admitted = Vec::new();
        for load in loads {
            if load.kind == OrderKind::Customer {
                let report = admit_destination(&load, &self.graph, &self.containers);
                if !report.passed() {
                    let ev = self
                        .tr(4, "transport_guard")
                        .subject(&load.load_id)
                        .detail("codes", json!(report.codes()));
                    self.emit(ev);
                    continue;
                }
                self.ledger.register(&load.load_id, load.deadline);
            }
            let ev = self
                .tr(4, "load_built")
                .subject(&load.load_id)
                .detail("kind", load.kind.as_str())
                .detail("orders", json_list(&load.member_orders))
                .detail("containers", json_list(&load.container_ids))
                .detail("destination", load.destination.as_str())
                .detail("deadline", load.deadline);
            self.emit(ev);
            for c in &load.container_ids {
                self.container_load.insert(c.clone(), load.load_id.clone());
            }
            admitted.push(load.load_id.clone());
            self.loads.insert(load.load_id.clone(), load);
        }
        if admitted.is_empty() {
            return Ok(());
        }
        self.down(Msg::Loads { loads: admitted })
    }

    /// A load is done once every container has arrived or been lost.
    fn close_load(&mut self, l: &LoadId) -> Result<(), KernelError> {
        let load = &self.loads[l];
        if matches!(load.status, LoadStatus::Arrived | LoadStatus::Failed) {
            return Ok(());
        }
        let arrived = self.load_arrived.get(l).cloned().unwrap_or_default();
        let lost = self.load_lost.get(l).cloned().unwrap_or_default();
        if !load.container_ids.iter().all(|c| arrived.contains(c) || lost.contains(c)) {
            return Ok(());
        }
        if arrived.is_empty() {
            let load = self.loads.get_mut(l).expect("load");
            load.status = LoadStatus::Failed;
            let ev = self.tr(4, "load_failed").subject(l).detail("reason", "all containers lost");
            self.emit(ev);
            return Ok(());
        }
        let load = self.loads.get_mut(l).expect("load");
        if load.status == LoadStatus::Pending {
            load.status = LoadStatus::Departed;
        }
        track(load, &TrackEvent::Arrived).map_err(|e| KernelError::OutOfOrder(e.to_string()))?;
        let deadline = load.deadline;
        let at = self.load_last_arrival.get(l).copied().unwrap_or(self.now());
        let late = self.ledger.record_arrival(l, at);
        let mut ev = self.tr(4, "load_arrived").subject(l).detail("deadline", deadline).detail("arrival", at);
        if let Some(late) = late {
            ev = ev.detail("late", late);
        }
        self.emit(ev);
        Ok(())
    }

    /// Resend a matching spare from here, or order new goods.
    fn recover(&mut self, lost: &ContainerId) -> Result<(), KernelError> {
        let here = self.here();
        let Some(order) = self.order_of(lost).cloned() else {
            return Ok(());
        };
        let Some(contract) = order.contracts.get(lost).cloned() else {
            return Ok(());
        };
        let st = &self.nodes[&here];
        let inventory: Vec<InventoryItem> = st
            .spares
            .iter()
            .filter(|s| !st.reserved.contains(*s))
            .filter_map(|s| {
                let c = &self.containers[s];
                let p = c.contents()?;
                (c.integrity == Integrity::Intact && c.contract.is_some()).then(|| InventoryItem {
                    container_id: s.clone(),
                    product_code: p.product_code.clone(),
                    quantity: p.quantity,
                })
            })
            .collect();
        let inventory_match = inventory
            .iter()
            .any(|i| i.product_code == contract.product_code && i.quantity == contract.quantity);
        let reship = shortest_path_scalarized(&self.graph, &contract.consignor, &contract.consignee, &self.params.weights, self.params.allow_expedite)
            .map(|r| r.total_cost)
            .unwrap_or(0.0);
        let policy = RecoveryPolicy {
            reorder_delay: self.params.reorder_delay,
            loss_penalty: self.params.loss_penalty,
        };
        let action = match recover_loss(lost, &contract, &inventory, &self.graph, reship, &policy) {
            Ok(a) => a,
            Err(e) => {
                let ev = self.tr(4, "loss_unrecoverable").subject(lost).detail("reason", e.to_string());
                self.emit(ev);
                return Ok(());
            }
        };
        let (name, step, spare) = match action.kind {
            RecoveryKind::Resend { spare } => {
                self.nodes.get_mut(&here).expect("node").reserved.insert(spare.clone());
                ("resend", RecoveryStep::Resend { spare: spare.clone() }, Some(spare))
            }
            RecoveryKind::Reorder { delay } => {
                let Some(demand) = self.demand_of(lost) else {
                    return Ok(());
                };
                ("reorder", RecoveryStep::Reorder { demand, delay }, None)
            }
        };
        let ev = self
            .tr(4, "loss_recovery")
            .subject(lost)
            .detail("action", name)
            .detail("extra_cost", action.extra_cost)
            .detail("spare", spare.map_or(serde_json::Value::Null, |s| s.as_str().into()))
            .detail("inventory_match", inventory_match)
            .detail("order", order.order_id.as_str());
        self.emit(ev);
        self.up(Msg::RecoveryPlan {
            lost: lost.clone(),
            step,
        })
    }

    // ---- layer 3 ----

    pub(super) fn l3(&mut self, msg: Msg) -> Result<(), KernelError> {
        match msg {
            Msg::Loads { loads } => {
                let ls: Vec<_> = loads
                    .iter()
                    .map(|l| {
                        let mut l = self.loads[l].clone();
                        l.container_ids.retain(|c| self.bucket.get(c) != Some(&super::Bucket::Lost));
                        l
                    })
                    .collect();
                let blocks = build_blocks(&ls, self.params.max_block_size, &mut self.ids);
                for b in blocks {
                    for c in &b.container_ids {
                        self.container_block.insert(c.clone(), b.block_id.clone());
                    }
                    let id = b.block_id.clone();
                    let ev = self
                        .tr(3, "block_built")
                        .subject(&id)
                        .detail("loads", json_list(&b.parent_loads))
                        .detail("containers", json_list(&b.container_ids))
                        .detail("destination", b.dst.as_str());
                    self.emit(ev);
                    self.blocks.insert(id.clone(), b);
                    self.route(&id)?;
                }
                Ok(())
            }
            Msg::HopStarted { block } => {
                let Some(b) = self.blocks.get_mut(&block) else { return Ok(()) };
                if b.hop_started {
                    return Ok(());
                }
                b.start_hop();
                let first = b.progress == 0;
                if first {
                    self.up(Msg::BlockDeparted { block })?;
                }
                Ok(())
            }
            Msg::HopDone { block } => {
                let Some(b) = self.blocks.get_mut(&block) else { return Ok(()) };
                let Some(at) = b.advance() else { return Ok(()) };
                let complete = b.is_complete();
                let ev = self.tr(3, "block_hop_done").subject(&block).detail("at", at.as_str());
                self.emit(ev);
                if complete {
                    self.up(Msg::BlockArrived { block })
                } else if self.blocks[&block].current_hop().is_some() {
                    self.down(Msg::BlockHop { block })
                } else {
                    self.route(&block)
                }
            }
            Msg::TopologyChanged => {
                let here = self.here();
                let mine: Vec<BlockId> = self
                    .blocks
                    .values()
                    .filter(|b| !b.is_complete() && !b.container_ids.is_empty() && b.anchor() == here)
                    .map(|b| b.block_id.clone())
                    .collect();
                for id in mine {
                    self.replan(&id)?;
                }
                Ok(())
            }
            Msg::Escalate { block } => {
                let Some(b) = self.blocks.get(&block) else { return Ok(()) };
                let from = b.current_hop().map(|h| h.edge.from.clone());
                let all_back = from.as_ref().is_some_and(|f| b.container_ids.iter().all(|c| self.at_node(c, f)));
                if all_back {
                    self.blocks.get_mut(&block).expect("block").roll_back_hop();
                }
                let ev = self.tr(3, "block_escalated").subject(&block).detail("rolled_back", all_back);
                self.emit(ev);
                if all_back {
                    self.replan(&block)?;
                }
                if self.blocks[&block].parked {
                    return Ok(());
                }
                self.down(Msg::BlockHop { block })
            }
            other => Err(self.abort(format!("L3 got {}", other.name()))),
        }
    }

    fn route_details(&self, r: &Route) -> Vec<(&'static str, serde_json::Value)> {
        vec![
            ("nodes", json_list(&r.nodes())),
            ("modes", json!(r.modes())),
            ("score", json!(route_cost(r, &self.params.weights))),
            ("time", json!(r.total_time)),
            ("cost", json!(r.total_cost)),
            ("risk", json!(r.total_risk)),
        ]
    }

    /// Routes a block from where it is and hands the next hop down.
    fn route(&mut self, id: &BlockId) -> Result<(), KernelError> {
        let b = self.blocks.remove(id).expect("block");
        match route_block(b, &self.graph, &self.params.weights, self.params.allow_expedite) {
            Ok(b) => {
                let mut ev = self.tr(3, "block_routed").subject(id);
                for (k, v) in self.route_details(b.route.as_ref().expect("routed")) {
                    ev = ev.detail(k, v);
                }
                self.emit(ev);
                self.blocks.insert(id.clone(), b);
                self.down(Msg::BlockHop { block: id.clone() })
            }
            Err((b, e)) => {
                self.blocks.insert(id.clone(), b);
                self.park(id, e.to_string())
            }
        }
    }

    fn park(&mut self, id: &BlockId, reason: String) -> Result<(), KernelError> {
        let ev = self.tr(3, "block_parked").subject(id).detail("reason", reason.as_str());
        self.emit(ev);
        self.up(Msg::BlockException { block: id.clone(), reason })
    }

    /// After a topology change: keep, replace or park the unfinished route.
    fn replan(&mut self, id: &BlockId) -> Result<(), KernelError> {
        let b = self.blocks.remove(id).expect("block");
        if b.parked {
            self.blocks.insert(id.clone(), b);
            return self.route(id);
        }
        let (b, outcome) = reroute(b, &self.graph, &self.params.weights, self.params.allow_expedite);
        let name = match &outcome {
            RerouteOutcome::Kept => "kept",
            RerouteOutcome::Replaced => "replaced",
            RerouteOutcome::Parked(_) => "parked",
        };
        let mut ev = self.tr(3, "block_rerouted").subject(id).detail("outcome", name);
        if let Some(r) = &b.route {
            for (k, v) in self.route_details(r) {
                ev = ev.detail(k, v);
            }
        }
        self.emit(ev);
        self.blocks.insert(id.clone(), b);
        match outcome {
            RerouteOutcome::Parked(e) => self.park(id, e.to_string()),
            _ => Ok(()),
        }
    }

    pub(super) fn block_weights(&self, cs: &[ContainerId]) -> BTreeMap<ContainerId, f64> {
        cs.iter().map(|c| (c.clone(), self.weight_of(c))).collect()
    }
}
