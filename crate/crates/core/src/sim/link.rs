//! Layers 2 and 1: shipments on means, custody, stowage and the steps
//! themselves.

use std::collections::BTreeSet;

use serde_json::json;

use super::{json_list, Bucket, Job, Msg, Simulation};
use crate::domain::{Location, MeanKind, MeanState, PiMean};
use crate::ids::{BlockId, ContainerId, MeanId, ShipmentId};
use crate::kernel::KernelError;
use crate::layers::link::{build_shipments, handle_mean_fault, record_handover, LinkAction, MeanFault, MeanFaultKind, Shipment, ShipmentState};
use crate::layers::order::OrderKind;
use crate::layers::physical::{handling_duration, plan_stowage, schedule_on_mean, step_duration, Candidate, PhysicalError, StowItem};
use crate::routing::{shortest_path_scalarized, CriteriaWeights, Mode};

impl Simulation<'_> {
    // ---- layer 2 ----

    pub(super) fn l2(&mut self, msg: Msg) -> Result<(), KernelError> {
        let here = self.here();
        match msg {
            Msg::BlockHop { block } => {
                let Some(b) = self.blocks.get(&block) else { return Ok(()) };
                let progress = b.progress;
                if !b.hop_started {
                    self.nodes.get_mut(&here).expect("node").started.remove(&(block.clone(), progress));
                }
                let queued: BTreeSet<ContainerId> = self.nodes[&here].waiting.iter().flat_map(|(_, cs)| cs.iter().cloned()).collect();
                let cs: Vec<ContainerId> = b
                    .container_ids
                    .iter()
                    .filter(|c| self.at_node(c, &here) && !queued.contains(*c))
                    .cloned()
                    .collect();
                if !cs.is_empty() {
                    self.nodes.get_mut(&here).expect("node").waiting.push((block, cs));
                }
                self.allocate()
            }
            Msg::StepDone { shipment } => {
                let s = self.shipments.get_mut(&shipment).expect("shipment");
                s.state = ShipmentState::Done;
                let (block, cs) = (s.parent_block.clone(), s.container_ids.clone());
                self.nodes.get_mut(&here).expect("node").gather.entry(block.clone()).or_default().extend(cs);
                self.check_gathered(&block)?;
                self.allocate()
            }
            Msg::Recheck { block } => {
                self.check_gathered(&block)?;
                self.allocate()
            }
            Msg::MeanAvailable => self.allocate(),
            Msg::StowageReject { block, containers } => {
                let st = self.nodes.get_mut(&here).expect("node");
                st.solo.extend(containers.iter().cloned());
                st.waiting.push((block, containers));
                Ok(())
            }
            Msg::MeanProblem { mean, kind } => {
                let wanted = match kind {
                    MeanFaultKind::Breakdown => ShipmentState::Faulted,
                    MeanFaultKind::Delay { .. } => ShipmentState::Moving,
                };
                let Some(sid) = self
                    .shipments
                    .values()
                    .rev()
                    .find(|s| s.assigned_mean == mean && s.state == wanted)
                    .map(|s| s.shipment_id.clone())
                else {
                    return Ok(());
                };
                let fault = MeanFault {
                    mean_id: mean.clone(),
                    kind,
                    at_time: self.now(),
                };
                let s = self.shipments[&sid].clone();
                let means: Vec<PiMean> = self.means.values().cloned().collect();
                let weights = self.block_weights(&s.container_ids);
                match handle_mean_fault(&s, &fault, &means, &weights, &mut self.ids) {
                    LinkAction::Postpone { extra_minutes } => self.down(Msg::Postpone {
                        shipment: sid,
                        extra_minutes,
                    }),
                    LinkAction::Reallocate(plan) => {
                        let ev = self
                            .tr(2, "reallocated")
                            .subject(&sid)
                            .detail("shipments", json_list(&plan.shipments.iter().map(|s| s.shipment_id.clone()).collect::<Vec<_>>()))
                            .detail("waiting", json_list(&plan.waiting));
                        self.emit(ev);
                        for ns in plan.shipments {
                            self.dispatch(ns)?;
                        }
                        if !plan.waiting.is_empty() {
                            self.nodes.get_mut(&here).expect("node").waiting.push((s.parent_block.clone(), plan.waiting));
                        }
                        Ok(())
                    }
                    LinkAction::Escalate => {
                        let ev = self.tr(2, "link_escalated").subject(&sid).detail("mean", mean.as_str());
                        self.emit(ev);
                        self.up(Msg::Escalate { block: s.parent_block })
                    }
                }
            }
            other => Err(self.abort(format!("L2 got {}", other.name()))),
        }
    }

    /// Every remaining container of the block is here: the hop is done.
    fn check_gathered(&mut self, block: &BlockId) -> Result<(), KernelError> {
        let here = self.here();
        let Some(b) = self.blocks.get(block) else { return Ok(()) };
        let Some(hop) = b.current_hop() else { return Ok(()) };
        if hop.edge.to != here || !b.hop_started {
            return Ok(());
        }
        let Some(got) = self.nodes[&here].gather.get(block) else { return Ok(()) };
        if b.container_ids.is_empty() || !b.container_ids.iter().all(|c| got.contains(c)) {
            return Ok(());
        }
        let final_stop = b.dst == here;
        let cs = b.container_ids.clone();
        self.nodes.get_mut(&here).expect("node").gather.remove(block);
        if final_stop {
            for c in &cs {
                if let Some(op) = self.custody.remove(c) {
                    let ev = self.tr(2, "custody_end").subject(c).detail("operator", op.as_str()).detail("reason", "delivered");
                    self.emit(ev);
                }
            }
        }
        self.up(Msg::HopDone { block: block.clone() })
    }

    /// Serves waiting blocks in arrival order with the idle means here.
    fn allocate(&mut self) -> Result<(), KernelError> {
        let here = self.here();
        let waiting = std::mem::take(&mut self.nodes.get_mut(&here).expect("node").waiting);
        let mut keep = Vec::new();
        for (block, cs) in waiting {
            let live: Vec<ContainerId> = cs.into_iter().filter(|c| self.at_node(c, &here)).collect();
            if live.is_empty() {
                continue;
            }
            let hop = match self.blocks.get(&block) {
                Some(b) if !b.parked => match b.current_hop() {
                    Some(h) if h.edge.from == here => h.clone(),
                    _ => {
                        keep.push((block, live));
                        continue;
                    }
                },
                _ => {
                    keep.push((block, live));
                    continue;
                }
            };
            let solo: Vec<ContainerId> = live.iter().filter(|c| self.nodes[&here].solo.contains(*c)).cloned().collect();
            let rest: Vec<(ContainerId, f64)> = live
                .iter()
                .filter(|c| !solo.contains(c))
                .map(|c| (c.clone(), self.weight_of(c)))
                .collect();
            let mut left = Vec::new();
            let mut batches: Vec<Vec<(ContainerId, f64)>> = solo.iter().map(|c| vec![(c.clone(), self.weight_of(c))]).collect();
            if !rest.is_empty() {
                batches.insert(0, rest);
            }
            for batch in batches {
                let means: Vec<PiMean> = self.means.values().cloned().collect();
                let plan = build_shipments(&block, &hop, &batch, &means, &mut self.ids);
                for s in plan.shipments {
                    self.dispatch(s)?;
                }
                left.extend(plan.waiting);
            }
            if !left.is_empty() {
                let ev = self
                    .tr(2, "wait_no_mean")
                    .subject(&block)
                    .detail("containers", json_list(&left))
                    .detail("from", hop.edge.from.as_str())
                    .detail("to", hop.edge.to.as_str());
                self.emit(ev);
                keep.push((block, left));
            }
        }
        let st = self.nodes.get_mut(&here).expect("node");
        // Anything queued while we were busy goes after the survivors.
        let late = std::mem::take(&mut st.waiting);
        st.waiting = keep;
        st.waiting.extend(late);
        Ok(())
    }

    /// Custody passes to the mean's operator, then the step goes down.
    fn dispatch(&mut self, s: Shipment) -> Result<(), KernelError> {
        let here = self.here();
        self.means.get_mut(&s.assigned_mean).expect("mean").state = MeanState::Busy;
        let ev = self
            .tr(2, "shipment_built")
            .subject(&s.shipment_id)
            .detail("block", s.parent_block.as_str())
            .detail("mean", s.assigned_mean.as_str())
            .detail("operator", s.operator.as_str())
            .detail("containers", json_list(&s.container_ids))
            .detail("from", s.step.edge.from.as_str())
            .detail("to", s.step.edge.to.as_str());
        self.emit(ev);
        for c in &s.container_ids {
            match self.custody.get(c).cloned() {
                None => {
                    let ev = self.tr(2, "custody_start").subject(c).detail("operator", s.operator.as_str());
                    self.emit(ev);
                }
                Some(prev) => {
                    if let Ok(h) = record_handover(&s, &prev, &here, self.now()) {
                        let ev = self
                            .tr(2, "handover")
                            .subject(c)
                            .detail("from", h.from_operator.as_str())
                            .detail("to", h.to_operator.as_str())
                            .detail("shipment", s.shipment_id.as_str());
                        self.emit(ev);
                    }
                }
            }
            self.custody.insert(c.clone(), s.operator.clone());
        }
        let block = s.parent_block.clone();
        let progress = self.blocks.get(&block).map_or(0, |b| b.progress);
        let first = self.nodes.get_mut(&here).expect("node").started.insert((block.clone(), progress));
        let id = s.shipment_id.clone();
        self.shipments.insert(id.clone(), s);
        self.down(Msg::Dispatch { shipment: id })?;
        if first {
            self.up(Msg::HopStarted { block })?;
        }
        Ok(())
    }

    // ---- layer 1 ----

    pub(super) fn l1(&mut self, msg: Msg) -> Result<(), KernelError> {
        match msg {
            Msg::Dispatch { shipment } => self.load_mean(shipment),
            Msg::Depart { shipment } => self.depart(&shipment),
            Msg::Arrive { shipment, generation } => self.arrive(&shipment, generation),
            Msg::MeanIdle { mean } => self.maybe_deadhead(&mean),
            Msg::DeadheadEnd { mean, generation } => {
                if self.generation.get(&mean).copied().unwrap_or(0) != generation {
                    return Ok(());
                }
                self.jobs.remove(&mean);
                let m = self.means.get_mut(&mean).expect("mean");
                m.location = m.home_node.clone();
                if m.state == MeanState::Busy {
                    m.state = MeanState::Idle;
                }
                let ev = self.tr(1, "mean_home").subject(&mean);
                self.emit(ev);
                self.up(Msg::MeanAvailable)
            }
            Msg::MeanProblem { mean, kind } => self.mean_problem(mean, kind),
            Msg::Postpone { shipment, extra_minutes } => {
                let mean = self.shipments[&shipment].assigned_mean.clone();
                let Some(Job::Step { arrive_at, .. }) = self.jobs.get(&mean).cloned() else {
                    return Ok(());
                };
                let at = arrive_at + extra_minutes;
                let gen = self.bump(&mean);
                self.jobs.insert(mean.clone(), Job::Step { shipment: shipment.clone(), arrive_at: at });
                let ev = self
                    .tr(1, "step_delayed")
                    .subject(&shipment)
                    .detail("mean", mean.as_str())
                    .detail("extra_minutes", extra_minutes)
                    .detail("arrive_at", at);
                self.emit(ev);
                let to = self.shipments[&shipment].step.edge.to.clone();
                self.send_at(at, &to, 1, Msg::Arrive { shipment, generation: gen })
            }
            other => Err(self.abort(format!("L1 got {}", other.name()))),
        }
    }

    fn bump(&mut self, mean: &MeanId) -> u64 {
        let g = self.generation.entry(mean.clone()).or_insert(0);
        *g += 1;
        *g
    }

    fn stow_items(&self, cs: &[ContainerId]) -> Vec<StowItem> {
        cs.iter()
            .map(|c| StowItem {
                container_id: c.clone(),
                weight: self.weight_of(c),
                fragile: self.containers[c].is_fragile(),
            })
            .collect()
    }

    fn load_mean(&mut self, sid: ShipmentId) -> Result<(), KernelError> {
        let here = self.here();
        let s = self.shipments[&sid].clone();
        let mean = self.means[&s.assigned_mean].clone();
        let cand = Candidate {
            shipment_id: sid.clone(),
            count: s.container_ids.len() as u32,
            weight: s.container_ids.iter().map(|c| self.weight_of(c)).sum(),
        };
        let (accepted, _) = schedule_on_mean(&mean, &[cand]);
        if accepted.is_empty() {
            return self.reject(&sid, s.container_ids.clone(), "over capacity");
        }
        let mut items = self.stow_items(&s.container_ids);
        let plan = match plan_stowage(&mean, &items, self.params.max_stack_height) {
            Ok(p) => p,
            Err(PhysicalError::Unstackable { .. }) => {
                let fragile: Vec<ContainerId> = items.iter().filter(|i| i.fragile).map(|i| i.container_id.clone()).collect();
                items.retain(|i| !i.fragile);
                self.shipments.get_mut(&sid).expect("shipment").container_ids.retain(|c| !fragile.contains(c));
                self.reject(&sid, fragile, "unstackable")?;
                if items.is_empty() {
                    return Ok(());
                }
                plan_stowage(&mean, &items, self.params.max_stack_height).map_err(|e| self.abort(e.to_string()))?
            }
        };
        let ev = self
            .tr(1, "stowage_planned")
            .subject(&sid)
            .detail("mean", mean.mean_id.as_str())
            .detail("kind", json!(mean.kind))
            .detail("max_height", if mean.kind == MeanKind::Ship { self.params.max_stack_height } else { 1 })
            .detail("stacks", json!(plan.stacks))
            .detail(
                "weights",
                json!(plan.stacks.iter().map(|s| s.iter().map(|c| self.weight_of(c)).collect::<Vec<_>>()).collect::<Vec<_>>()),
            )
            .detail(
                "fragile",
                json!(plan.stacks.iter().map(|s| s.iter().map(|c| self.containers[c].is_fragile()).collect::<Vec<_>>()).collect::<Vec<_>>()),
            );
        self.emit(ev);
        let gear = self
            .means
            .values()
            .filter(|g| g.kind.is_handling_gear() && g.location == here && g.state != MeanState::Broken)
            .min_by(|a, b| a.mean_id.cmp(&b.mean_id))
            .cloned();
        match gear {
            Some(g) if self.params.intra_node_handling => {
                let d = handling_duration(&g, items.len());
                let ev = self.tr(1, "handling").subject(&sid).detail("gear", g.mean_id.as_str()).detail("duration", d);
                self.emit(ev);
                self.send_at(self.now() + d, &here, 1, Msg::Depart { shipment: sid })
            }
            _ => self.depart(&sid),
        }
    }

    /// Containers the mean cannot take go back to the link layer.
    fn reject(&mut self, sid: &ShipmentId, cs: Vec<ContainerId>, why: &str) -> Result<(), KernelError> {
        let s = self.shipments.get_mut(sid).expect("shipment");
        s.container_ids.retain(|c| !cs.contains(c));
        let (block, mean, empty) = (s.parent_block.clone(), s.assigned_mean.clone(), s.container_ids.is_empty());
        if empty {
            s.state = ShipmentState::Done;
            self.means.get_mut(&mean).expect("mean").state = MeanState::Idle;
        }
        let ev = self.tr(1, "stowage_rejected").subject(sid).detail("containers", json_list(&cs)).detail("reason", why);
        self.emit(ev);
        self.up(Msg::StowageReject { block, containers: cs })
    }

    fn depart(&mut self, sid: &ShipmentId) -> Result<(), KernelError> {
        let s = self.shipments.get_mut(sid).expect("shipment");
        s.state = ShipmentState::Moving;
        let s = s.clone();
        let mean = self.means[&s.assigned_mean].clone();
        let hop = &s.step;
        let duration = step_duration(hop);
        let arrive_at = self.now() + duration;
        let kind = s.container_ids.first().map_or(OrderKind::Customer, |c| self.kind_of(c));
        let base = hop.edge.cost(Mode::Normal);
        let premium = hop.cost() - base;
        let weight: f64 = s.container_ids.iter().map(|c| self.weight_of(c)).sum();
        let (cust, internal) = if kind == OrderKind::Customer { (base, 0.0) } else { (0.0, base) };
        let ev = self
            .tr(1, "step_depart")
            .subject(sid)
            .subjects(s.container_ids.iter())
            .detail("shipment", sid.as_str())
            .detail("block", s.parent_block.as_str())
            .detail("mean", mean.mean_id.as_str())
            .detail("from", hop.edge.from.as_str())
            .detail("to", hop.edge.to.as_str())
            .detail("mode", json!(hop.mode))
            .detail("count", s.container_ids.len())
            .detail("weight", weight)
            .detail("capacity", mean.container_capacity)
            .detail("max_weight", mean.max_total_weight)
            .detail("cost_customer", cust)
            .detail("cost_internal", internal)
            .detail("premium", premium)
            .detail("duration", duration)
            .detail("kind", kind.as_str());
        self.emit(ev);
        for c in &s.container_ids {
            self.containers.get_mut(c).expect("container").location = Location::Mean(mean.mean_id.clone());
            if self.bucket.get(c) != Some(&Bucket::Transit) {
                self.census_move(c, Bucket::Transit);
            }
        }
        self.means.get_mut(&mean.mean_id).expect("mean").state = MeanState::Busy;
        let gen = self.bump(&mean.mean_id);
        self.jobs.insert(
            mean.mean_id.clone(),
            Job::Step {
                shipment: sid.clone(),
                arrive_at,
            },
        );
        let to = hop.edge.to.clone();
        self.send_at(
            arrive_at,
            &to,
            1,
            Msg::Arrive {
                shipment: sid.clone(),
                generation: gen,
            },
        )
    }

    fn arrive(&mut self, sid: &ShipmentId, generation: u64) -> Result<(), KernelError> {
        let here = self.here();
        let s = self.shipments[sid].clone();
        let mean = s.assigned_mean.clone();
        if self.generation.get(&mean).copied().unwrap_or(0) != generation {
            return Ok(());
        }
        self.jobs.remove(&mean);
        let m = self.means.get_mut(&mean).expect("mean");
        m.location = here.clone();
        m.state = MeanState::Idle;
        for c in &s.container_ids {
            self.containers.get_mut(c).expect("container").location = Location::Node(here.clone());
        }
        let ev = self
            .tr(1, "step_arrive")
            .subject(sid)
            .subjects(s.container_ids.iter())
            .detail("shipment", sid.as_str())
            .detail("block", s.parent_block.as_str())
            .detail("mean", mean.as_str())
            .detail("from", s.step.edge.from.as_str())
            .detail("to", here.as_str());
        self.emit(ev);
        self.up(Msg::StepDone { shipment: sid.clone() })?;
        self.send(&here, 1, Msg::MeanIdle { mean })
    }

    /// An idle mean away from home runs back empty.
    fn maybe_deadhead(&mut self, mean: &MeanId) -> Result<(), KernelError> {
        let m = self.means[mean].clone();
        if m.state != MeanState::Idle || m.location == m.home_node || self.jobs.contains_key(mean) {
            return Ok(());
        }
        let time_only = CriteriaWeights {
            time: 1.0,
            cost: 0.0,
            risk: 0.0,
        };
        let Ok(route) = shortest_path_scalarized(&self.graph, &m.location, &m.home_node, &time_only, false) else {
            let ev = self.tr(1, "mean_stranded").subject(mean);
            self.emit(ev);
            return Ok(());
        };
        let duration: u64 = route.hops.iter().map(step_duration).sum();
        let arrive_at = self.now() + duration;
        let ev = self
            .tr(1, "mean_deadhead")
            .subject(mean)
            .detail("from", m.location.as_str())
            .detail("to", m.home_node.as_str())
            .detail("duration", duration);
        self.emit(ev);
        self.means.get_mut(mean).expect("mean").state = MeanState::Busy;
        let gen = self.bump(mean);
        self.jobs.insert(
            mean.clone(),
            Job::Deadhead {
                to: m.home_node.clone(),
                arrive_at,
            },
        );
        self.send_at(arrive_at, &m.home_node, 1, Msg::DeadheadEnd { mean: mean.clone(), generation: gen })
    }

    fn mean_problem(&mut self, mean: MeanId, kind: MeanFaultKind) -> Result<(), KernelError> {
        let job = self.jobs.get(&mean).cloned();
        match (kind, job) {
            (MeanFaultKind::Breakdown, None) | (MeanFaultKind::Breakdown, Some(Job::Deadhead { .. })) => {
                self.jobs.remove(&mean);
                self.bump(&mean);
                self.means.get_mut(&mean).expect("mean").state = MeanState::Broken;
                let ev = self.tr(1, "mean_broken").subject(&mean);
                self.emit(ev);
                Ok(())
            }
            (MeanFaultKind::Breakdown, Some(Job::Step { shipment, .. })) => {
                self.jobs.remove(&mean);
                self.bump(&mean);
                self.means.get_mut(&mean).expect("mean").state = MeanState::Broken;
                let s = self.shipments.get_mut(&shipment).expect("shipment");
                s.state = ShipmentState::Faulted;
                let s = s.clone();
                let from = s.step.edge.from.clone();
                for c in &s.container_ids {
                    self.containers.get_mut(c).expect("container").location = Location::Node(from.clone());
                }
                let ev = self
                    .tr(1, "step_aborted")
                    .subject(&shipment)
                    .subjects(s.container_ids.iter())
                    .detail("shipment", shipment.as_str())
                    .detail("mean", mean.as_str())
                    .detail("back_to", from.as_str());
                self.emit(ev);
                let ev = self.tr(1, "mean_broken").subject(&mean);
                self.emit(ev);
                self.up(Msg::MeanProblem { mean, kind })
            }
            (MeanFaultKind::Delay { extra_minutes }, Some(Job::Deadhead { to, arrive_at })) => {
                let at = arrive_at + extra_minutes;
                let gen = self.bump(&mean);
                self.jobs.insert(mean.clone(), Job::Deadhead { to: to.clone(), arrive_at: at });
                let ev = self.tr(1, "deadhead_delayed").subject(&mean).detail("arrive_at", at);
                self.emit(ev);
                self.send_at(at, &to, 1, Msg::DeadheadEnd { mean, generation: gen })
            }
            (MeanFaultKind::Delay { .. }, Some(Job::Step { .. })) => self.up(Msg::MeanProblem { mean, kind }),
            (MeanFaultKind::Delay { .. }, None) => Ok(()),
        }
    }
}
