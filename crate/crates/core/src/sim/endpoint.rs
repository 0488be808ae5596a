//! Layers 7, 6 and 5 at each node: goods, container pools, orders.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::json;

use super::{json_list, Bucket, Msg, Purpose, RecoveryStep, Simulation};
use crate::domain::{ClassId, ContainerClass, Location};
use crate::ids::{ContainerId, ContractId, DemandId, Minutes, NodeId, OrderId};
use crate::kernel::KernelError;
use crate::layers::container::{group_into_sets, handle_orphan, inspect_container, nearest, Disposition, SetMember, SetPolicy};
use crate::layers::order::{build_orders, settle_transaction, OrderConstraints, OrderKind, TxEvent, TxStatus};
use crate::layers::product::{empty_container, fill_container, ContractTerms};

impl Simulation<'_> {
    // ---- layer 7 ----

    pub(super) fn l7(&mut self, msg: Msg) -> Result<(), KernelError> {
        match msg {
            Msg::Release { demands } => {
                for d in demands {
                    let demand = &self.demands[&d];
                    let (class, count) = (demand.class(), demand.containers + demand.spares);
                    let ev = self
                        .tr(7, "demand_released")
                        .subject(&d)
                        .detail("containers", demand.containers)
                        .detail("spares", demand.spares)
                        .detail("consignee", demand.consignee().as_str());
                    self.emit(ev);
                    self.down(Msg::EmptyRequest {
                        purpose: Purpose::Demand(d),
                        class,
                        count,
                    })?;
                }
                Ok(())
            }
            Msg::EmptyGrant { purpose, containers } => self.fill(purpose, containers),
            Msg::Refill { lost, demand, delay } => {
                let ev = self.tr(7, "refill_scheduled").subject(&lost).detail("demand", demand.as_str()).detail("due", self.now() + delay);
                self.emit(ev);
                let here = self.here();
                self.send_at(self.now() + delay, &here, 7, Msg::RefillDue { lost, demand })
            }
            Msg::RefillDue { lost, demand } => {
                let class = self.demands[&demand].class();
                self.down(Msg::EmptyRequest {
                    purpose: Purpose::Refill { demand, lost },
                    class,
                    count: 1,
                })
            }
            Msg::Deliver { containers } => {
                let mut done = Vec::new();
                for id in containers {
                    let c = self.containers[&id].clone();
                    let Some(expected) = c.contract.clone() else {
                        let ev = self.tr(7, "empty_refused").subject(&id).detail("reason", "no contract");
                        self.emit(ev);
                        continue;
                    };
                    match empty_container(c, &expected) {
                        Ok((product, c)) => {
                            self.containers.insert(id.clone(), c);
                            let ev = self
                                .tr(7, "container_emptied")
                                .subject(&id)
                                .detail("product_code", product.product_code.as_str())
                                .detail("quantity", product.quantity)
                                .detail("contract", expected.contract_id.as_str());
                            self.emit(ev);
                            done.push(id);
                        }
                        Err((e, c)) => {
                            self.containers.insert(id.clone(), c);
                            let ev = self.tr(7, "empty_refused").subject(&id).detail("reason", e.to_string());
                            self.emit(ev);
                        }
                    }
                }
                if done.is_empty() {
                    return Ok(());
                }
                self.down(Msg::Emptied { containers: done })
            }
            other => Err(self.abort(format!("L7 got {}", other.name()))),
        }
    }

    fn fill(&mut self, purpose: Purpose, containers: Vec<ContainerId>) -> Result<(), KernelError> {
        let (demand_id, lost) = match &purpose {
            Purpose::Demand(d) => (d.clone(), None),
            Purpose::Refill { demand, lost } => (demand.clone(), Some(lost.clone())),
        };
        let demand = self.demands[&demand_id].clone();
        let mut filled = Vec::new();
        let mut spares = Vec::new();
        for id in containers {
            let (index, spare) = match &lost {
                Some(_) => (None, false),
                None => {
                    let n = self.next_slot.entry(demand_id.clone()).or_insert(0);
                    let i = *n;
                    *n += 1;
                    (Some(i), i >= demand.containers)
                }
            };
            let contract_id = match (&lost, index) {
                (Some(l), _) => format!("K:{demand_id}:r:{l}"),
                (None, Some(i)) => format!("K:{demand_id}:{i}"),
                (None, None) => unreachable!(),
            };
            let terms = ContractTerms {
                contract_id: ContractId::new(contract_id),
                consignor: demand.consignor.clone(),
                consignee: demand.consignee(),
                deadline: demand.deadline,
                priority: demand.priority,
                payment_total: demand.payment.total,
                intermediate_payments: demand.payment.intermediate.clone(),
            };
            let empty = self.containers[&id].clone();
            match fill_container(&demand.product, empty, terms) {
                Ok((c, _)) => {
                    self.containers.insert(id.clone(), c);
                    let mut ev = self
                        .tr(7, "container_filled")
                        .subject(&id)
                        .detail("demand", demand_id.as_str())
                        .detail("spare", spare)
                        .detail("product_code", demand.product.product_code.as_str())
                        .detail("quantity", demand.product.quantity)
                        .detail("class", self.containers[&id].class.class_id.as_str())
                        .detail("perishable", demand.product.perishable);
                    if let Some(i) = index {
                        ev = ev.detail("index", i);
                        self.slots.insert((demand_id.clone(), i), id.clone());
                    }
                    if let Some(l) = &lost {
                        ev = ev.detail("replaces", l.as_str());
                    }
                    self.emit(ev);
                    self.origin_demand.insert(id.clone(), demand_id.clone());
                    self.census_move(&id, Bucket::Site);
                    if spare {
                        spares.push(id);
                    } else {
                        filled.push(id);
                    }
                }
                Err(e) => {
                    let ev = self.tr(7, "fill_failed").subject(&id).detail("reason", e.to_string());
                    self.emit(ev);
                    let class = self.containers[&id].class.class_id;
                    let here = self.here();
                    self.nodes.get_mut(&here).expect("node").empties.entry(class).or_default().insert(id);
                }
            }
        }
        if filled.is_empty() && spares.is_empty() {
            return Ok(());
        }
        self.down(Msg::Filled {
            containers: filled,
            spares,
            recovery_of: lost,
        })
    }

    // ---- layer 6 ----

    pub(super) fn l6(&mut self, msg: Msg) -> Result<(), KernelError> {
        let here = self.here();
        match msg {
            Msg::EmptyRequest { purpose, class, count } => {
                self.node_mut(&here).pending.push_back((purpose, class, count));
                self.serve_pending()?;
                let short: u32 = self.nodes[&here].pending.iter().filter(|p| p.1 == class).map(|p| p.2).sum();
                if short > 0 {
                    let ev = self
                        .tr(6, "empty_shortage")
                        .detail("class", class.as_str())
                        .detail("unmet", short);
                    self.emit(ev);
                }
                Ok(())
            }
            Msg::Reposition { class, to, count } => {
                let take: Vec<ContainerId> = self.nodes[&here]
                    .empties
                    .get(&class)
                    .map(|s| s.iter().take(count as usize).cloned().collect())
                    .unwrap_or_default();
                if take.is_empty() {
                    return Ok(());
                }
                for c in &take {
                    self.node_mut(&here).empties.get_mut(&class).expect("class").remove(c);
                }
                let ev = self
                    .tr(6, "reposition_dispatched")
                    .subjects(take.iter())
                    .detail("class", class.as_str())
                    .detail("to", to.as_str());
                self.emit(ev);
                let deadline = self.now() + self.params.deadline_window;
                self.internal_sets(take, &to, deadline, OrderKind::Reposition)
            }
            Msg::Filled {
                containers,
                spares,
                recovery_of,
            } => {
                for s in &spares {
                    self.node_mut(&here).spares.insert(s.clone());
                    let ev = self.tr(6, "spare_stored").subject(s);
                    self.emit(ev);
                }
                self.customer_sets(containers, recovery_of)
            }
            Msg::ReleaseSpare { lost, spare } => {
                self.node_mut(&here).reserved.remove(&spare);
                if !self.node_mut(&here).spares.remove(&spare) {
                    let ev = self.tr(6, "spare_missing").subject(&spare).detail("replaces", lost.as_str());
                    self.emit(ev);
                    return Ok(());
                }
                let ev = self.tr(6, "spare_released").subject(&spare).detail("replaces", lost.as_str());
                self.emit(ev);
                self.customer_sets(vec![spare], Some(lost))
            }
            Msg::Refill { lost, demand, delay } => self.up(Msg::Refill { lost, demand, delay }),
            Msg::Received { containers } => self.receive(containers),
            Msg::Emptied { containers } => {
                for c in &containers {
                    self.census_move(c, Bucket::Depot);
                    self.stock(c.clone());
                }
                self.serve_pending()?;
                self.down(Msg::Delivered { containers })
            }
            Msg::OrphanFound { containers } => self.dispose_orphans(containers),
            other => Err(self.abort(format!("L6 got {}", other.name()))),
        }
    }

    fn node_mut(&mut self, n: &NodeId) -> &mut super::NodeState {
        self.nodes.get_mut(n).expect("known node")
    }

    fn stock(&mut self, c: ContainerId) {
        let class = self.containers[&c].class.class_id;
        let here = self.here();
        self.node_mut(&here).empties.entry(class).or_default().insert(c);
    }

    /// First come first served; the head of the queue may be served in parts.
    fn serve_pending(&mut self) -> Result<(), KernelError> {
        let here = self.here();
        let mut grants = Vec::new();
        {
            let st = self.nodes.get_mut(&here).expect("node");
            let mut keep = std::collections::VecDeque::new();
            let mut blocked: BTreeSet<ClassId> = BTreeSet::new();
            while let Some((purpose, class, count)) = st.pending.pop_front() {
                if blocked.contains(&class) {
                    keep.push_back((purpose, class, count));
                    continue;
                }
                let pool = st.empties.entry(class).or_default();
                let take: Vec<ContainerId> = pool.iter().take(count as usize).cloned().collect();
                for c in &take {
                    pool.remove(c);
                }
                let rest = count - take.len() as u32;
                if !take.is_empty() {
                    grants.push((purpose.clone(), take));
                }
                if rest > 0 {
                    blocked.insert(class);
                    keep.push_back((purpose, class, rest));
                }
            }
            st.pending = keep;
        }
        for (purpose, containers) in grants {
            self.up(Msg::EmptyGrant { purpose, containers })?;
        }
        Ok(())
    }

    fn customer_sets(&mut self, containers: Vec<ContainerId>, recovery_of: Option<ContainerId>) -> Result<(), KernelError> {
        if containers.is_empty() {
            return Ok(());
        }
        let here = self.here();
        let members: Vec<SetMember> = containers
            .iter()
            .map(|id| {
                let c = &self.containers[id];
                let contract = c.contract.clone().expect("filled container has a contract");
                let demand = &self.demands[&self.origin_demand[id]];
                let index = self.slots.iter().find(|(_, v)| *v == id).map(|((_, i), _)| *i);
                SetMember {
                    container_id: id.clone(),
                    origin: here.clone(),
                    destination: contract.consignee.clone(),
                    deadline: contract.deadline,
                    priority: contract.priority,
                    dangerous: c.is_dangerous(),
                    reefer: c.class.class_id == ClassId::Reefer,
                    suborder: index.map(|i| (demand.demand_id.clone(), demand.suborder_of(i))),
                    contract: Some(contract),
                }
            })
            .collect();
        for id in &containers {
            self.container_kind.insert(id.clone(), OrderKind::Customer);
        }
        let policy = SetPolicy {
            max_set_size: self.params.max_set_size,
        };
        let sets = group_into_sets(&members, &policy, &mut self.ids);
        for s in &sets {
            let ev = self
                .tr(6, "set_built")
                .subject(&s.set_id)
                .detail("containers", json_list(&s.containers()))
                .detail("destination", s.destination.as_str());
            self.emit(ev);
        }
        self.down(Msg::Sets {
            sets,
            kind: OrderKind::Customer,
            recovery_of,
        })
    }

    /// Empty, damaged or orphaned containers moved for the network's own sake.
    fn internal_sets(&mut self, containers: Vec<ContainerId>, to: &NodeId, deadline: Minutes, kind: OrderKind) -> Result<(), KernelError> {
        let here = self.here();
        let members: Vec<SetMember> = containers
            .iter()
            .map(|id| SetMember {
                container_id: id.clone(),
                origin: here.clone(),
                destination: to.clone(),
                deadline,
                priority: 1,
                dangerous: false,
                reefer: false,
                suborder: None,
                contract: None,
            })
            .collect();
        for id in &containers {
            self.container_kind.insert(id.clone(), kind);
        }
        let policy = SetPolicy {
            max_set_size: self.params.max_set_size,
        };
        let sets = group_into_sets(&members, &policy, &mut self.ids);
        self.down(Msg::Sets {
            sets,
            kind,
            recovery_of: None,
        })
    }

    fn receive(&mut self, containers: Vec<ContainerId>) -> Result<(), KernelError> {
        let here = self.here();
        let mut deliver = Vec::new();
        let mut damaged = Vec::new();
        for id in containers {
            match self.kind_of(&id) {
                OrderKind::Customer => {
                    let report = inspect_container(&self.containers[&id]);
                    if report.passed {
                        deliver.push(id);
                    } else {
                        let ev = self.tr(6, "damage_detected").subject(&id);
                        self.emit(ev);
                        damaged.push(id);
                    }
                }
                OrderKind::Reposition => {
                    self.census_move(&id, Bucket::Depot);
                    let ev = self.tr(6, "reposition_received").subject(&id);
                    self.emit(ev);
                    self.stock(id);
                }
                OrderKind::DamagedReturn => {
                    self.census_move(&id, Bucket::Depot);
                    self.node_mut(&here).damaged_hold.insert(id.clone());
                    let ev = self.tr(6, "damaged_received").subject(&id);
                    self.emit(ev);
                }
                OrderKind::Disposal => {
                    self.census_move(&id, Bucket::Disposal);
                    let ev = self.tr(6, "orphan_disposed").subject(&id);
                    self.emit(ev);
                }
            }
        }
        self.serve_pending()?;
        if !damaged.is_empty() {
            self.down(Msg::DamageSignal {
                containers: damaged.clone(),
            })?;
            self.return_damaged(damaged)?;
        }
        if !deliver.is_empty() {
            self.up(Msg::Deliver { containers: deliver })?;
        }
        Ok(())
    }

    /// Damaged containers go to the nearest container depot for testing.
    fn return_damaged(&mut self, damaged: Vec<ContainerId>) -> Result<(), KernelError> {
        let here = self.here();
        let depots: Vec<NodeId> = self.graph.nodes().filter(|n| n.is_container_depot).map(|n| n.node_id.clone()).collect();
        match nearest(&here, &depots, &self.graph, &self.params.weights, self.params.allow_expedite) {
            Some((node, _)) if node == here => {
                for c in damaged {
                    self.census_move(&c, Bucket::Depot);
                    self.container_kind.insert(c.clone(), OrderKind::DamagedReturn);
                    self.node_mut(&here).damaged_hold.insert(c.clone());
                    let ev = self.tr(6, "damaged_received").subject(&c);
                    self.emit(ev);
                }
                Ok(())
            }
            Some((node, _)) => {
                let ev = self.tr(6, "damaged_return").subjects(damaged.iter()).detail("to", node.as_str());
                self.emit(ev);
                let deadline = self.now() + self.params.deadline_window;
                self.internal_sets(damaged, &node, deadline, OrderKind::DamagedReturn)
            }
            None => {
                for c in damaged {
                    self.node_mut(&here).damaged_hold.insert(c.clone());
                    let ev = self.tr(6, "damaged_held").subject(&c);
                    self.emit(ev);
                }
                Ok(())
            }
        }
    }

    fn dispose_orphans(&mut self, containers: Vec<ContainerId>) -> Result<(), KernelError> {
        let here = self.here();
        let mut routed: BTreeMap<NodeId, Vec<ContainerId>> = BTreeMap::new();
        for id in containers {
            self.node_mut(&here).spares.remove(&id);
            self.node_mut(&here).withheld.remove(&id);
            match handle_orphan(&here, &self.disposal, &self.graph, &self.params.weights, self.params.allow_expedite) {
                Disposition::Hold { node } => {
                    self.container_kind.insert(id.clone(), OrderKind::Disposal);
                    self.census_move(&id, Bucket::Disposal);
                    let ev = self.tr(6, "orphan_held").subject(&id).detail("node", node.as_str());
                    self.emit(ev);
                }
                Disposition::RouteTo { node, score } => {
                    let ev = self.tr(6, "orphan_routed").subject(&id).detail("to", node.as_str()).detail("score", score);
                    self.emit(ev);
                    routed.entry(node).or_default().push(id);
                }
                Disposition::Stranded { node } => {
                    let ev = self.tr(6, "orphan_stranded").subject(&id).detail("node", node.as_str());
                    self.emit(ev);
                }
            }
        }
        let deadline = self.now() + self.params.deadline_window;
        for (node, cs) in routed {
            self.internal_sets(cs, &node, deadline, OrderKind::Disposal)?;
        }
        Ok(())
    }

    // ---- layer 5 ----

    pub(super) fn l5(&mut self, msg: Msg) -> Result<(), KernelError> {
        match msg {
            Msg::Sets { sets, kind, recovery_of } => {
                let constraints = OrderConstraints {
                    deadline_window: self.params.deadline_window,
                    kind,
                    recovery_of,
                };
                let (orders, withheld) = build_orders(&sets, &constraints, &self.graph, self.now(), &mut self.ids);
                let here = self.here();
                for w in withheld {
                    let ev = self.tr(5, w.code).subject(&w.container_id).detail("detail", w.detail.as_str());
                    self.emit(ev);
                    self.node_mut(&here).withheld.insert(w.container_id);
                }
                let mut ids = Vec::new();
                for o in orders {
                    let mut ev = self
                        .tr(5, "order_created")
                        .subject(&o.order_id)
                        .detail("kind", o.kind.as_str())
                        .detail("origin", o.origin.as_str())
                        .detail("destination", o.destination.as_str())
                        .detail("deadline", o.deadline)
                        .detail("containers", json_list(&o.container_ids()))
                        .detail("contract_total", o.contract_total());
                    if let Some(r) = &o.recovery_of {
                        ev = ev.detail("recovery_of", r.as_str());
                    }
                    self.emit(ev);
                    for c in o.container_ids() {
                        self.container_order.insert(c, o.order_id.clone());
                    }
                    self.order_delivered.insert(o.order_id.clone(), BTreeSet::new());
                    ids.push(o.order_id.clone());
                    self.orders.insert(o.order_id.clone(), o);
                }
                if ids.is_empty() {
                    return Ok(());
                }
                self.down(Msg::Orders { orders: ids })
            }
            Msg::OrdersDeparted { orders } => {
                for o in orders {
                    if self.orders[&o].transaction.status == TxStatus::Open {
                        self.settle(&o, TxEvent::Departed)?;
                    }
                }
                Ok(())
            }
            Msg::Arrived { containers } => {
                let mut orphans = Vec::new();
                let mut intact = Vec::new();
                let mut orders = BTreeSet::new();
                for c in containers {
                    let orphaned = self.kind_of(&c) == OrderKind::Customer && self.containers[&c].contract.is_none();
                    if orphaned {
                        orphans.push(c);
                    } else {
                        if let Some(o) = self.container_order.get(&c) {
                            orders.insert(o.clone());
                        }
                        intact.push(c);
                    }
                }
                for o in orders {
                    let st = self.orders[&o].transaction.status;
                    if matches!(st, TxStatus::Open | TxStatus::Departed) && self.orders[&o].kind == OrderKind::Customer {
                        self.settle(&o, TxEvent::Arrived)?;
                    }
                }
                if !orphans.is_empty() {
                    self.orphans_found(orphans)?;
                }
                if !intact.is_empty() {
                    self.up(Msg::Received { containers: intact })?;
                }
                Ok(())
            }
            Msg::OrphanCheck { containers } => self.orphans_found(containers),
            Msg::DamageSignal { containers } => {
                for c in containers {
                    self.fail_for(&c, TxEvent::Damaged, "damaged")?;
                    self.down(Msg::Recover { container: c })?;
                }
                Ok(())
            }
            Msg::LostSignal { containers } => {
                for c in containers {
                    self.fail_for(&c, TxEvent::Lost, "lost")?;
                }
                Ok(())
            }
            Msg::Delivered { containers } => {
                let mut touched = BTreeSet::new();
                for c in containers {
                    if let Some(o) = self.container_order.get(&c).cloned() {
                        self.order_delivered.entry(o.clone()).or_default().insert(c);
                        touched.insert(o);
                    }
                }
                for o in touched {
                    let order = &self.orders[&o];
                    let all = order.container_ids().iter().all(|c| self.order_delivered[&o].contains(c));
                    if all && order.transaction.status != TxStatus::Failed {
                        self.settle(&o, TxEvent::Delivered)?;
                    }
                }
                Ok(())
            }
            Msg::RecoveryPlan { lost, step } => match step {
                RecoveryStep::Resend { spare } => self.up(Msg::ReleaseSpare { lost, spare }),
                RecoveryStep::Reorder { demand, delay } => self.up(Msg::Refill { lost, demand, delay }),
            },
            other => Err(self.abort(format!("L5 got {}", other.name()))),
        }
    }

    fn orphans_found(&mut self, containers: Vec<ContainerId>) -> Result<(), KernelError> {
        for c in &containers {
            let ev = self.tr(5, "orphan_detected").subject(c);
            self.emit(ev);
        }
        for c in &containers {
            let had_order = self.order_of(c).is_some_and(|o| o.kind == OrderKind::Customer);
            if had_order {
                let open = self.fail_for(c, TxEvent::Lost, "orphaned")?;
                if open {
                    self.down(Msg::Recover { container: c.clone() })?;
                }
            }
        }
        self.up(Msg::OrphanFound { containers })
    }

    /// Fails the container's order. True when the order was still open.
    fn fail_for(&mut self, c: &ContainerId, event: TxEvent, reason: &str) -> Result<bool, KernelError> {
        let Some(o) = self.container_order.get(c).cloned() else {
            return Ok(false);
        };
        let st = self.orders[&o].transaction.status;
        if matches!(st, TxStatus::Settled | TxStatus::Failed) {
            return Ok(false);
        }
        self.settle(&o, event)?;
        let ev = self.tr(5, "order_failed").subject(&o).detail("container", c.as_str()).detail("reason", reason);
        self.emit(ev);
        Ok(true)
    }

    fn settle(&mut self, o: &OrderId, event: TxEvent) -> Result<(), KernelError> {
        let order = self.orders.get_mut(o).expect("order");
        let before = order.transaction.paid;
        let tx = settle_transaction(order, event).map_err(|e| KernelError::Abort(e.to_string()))?;
        let kind = order.kind;
        let deadline = order.deadline;
        let paid = tx.paid - before;
        if paid > 0.0 {
            let ev = self
                .tr(5, "payment")
                .subject(o)
                .detail("event", json!(event))
                .detail("amount", paid)
                .detail("paid", tx.paid);
            self.emit(ev);
        }
        if tx.status == TxStatus::Settled {
            let ev = self
                .tr(5, "order_settled")
                .subject(o)
                .detail("kind", kind.as_str())
                .detail("paid", tx.paid)
                .detail("deadline", deadline)
                .detail("late", self.now() > deadline);
            self.emit(ev);
        }
        Ok(())
    }

    pub(super) fn class_of(&self, c: &ContainerId) -> ContainerClass {
        self.containers[c].class
    }

    pub(super) fn at_node(&self, c: &ContainerId, n: &NodeId) -> bool {
        self.containers[c].location == Location::Node(n.clone())
    }

    pub(super) fn demand_of(&self, c: &ContainerId) -> Option<DemandId> {
        self.origin_demand.get(c).cloned()
    }
}
