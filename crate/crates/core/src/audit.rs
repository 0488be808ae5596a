//! Post-hoc checks over a finished trace. Each checker rebuilds what it
//! needs from the records and never trusts the simulator's own verdicts.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::ids::Minutes;
use crate::kernel::{Trace, TraceEvent};
use crate::trace_io::RUN_END;

pub const CHECKS: [&str; 14] = [
    "clock",
    "layering",
    "descent_ascent",
    "census",
    "capacity",
    "stowage",
    "custody",
    "contiguity",
    "lost_stay_lost",
    "containerization",
    "reefer",
    "deadlines",
    "recovery",
    "transport_guard",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub check: &'static str,
    pub t: Minutes,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, check: &str) -> usize {
        self.violations.iter().filter(|v| v.check == check).count()
    }
}

pub fn audit(trace: &Trace) -> AuditReport {
    let mut v = Vec::new();
    v.extend(clock(trace));
    v.extend(layering(trace));
    v.extend(descent_ascent(trace));
    v.extend(census(trace));
    v.extend(capacity(trace));
    v.extend(stowage(trace));
    v.extend(custody(trace));
    v.extend(contiguity(trace));
    v.extend(lost_stay_lost(trace));
    v.extend(containerization(trace));
    v.extend(reefer(trace));
    let d = deadlines(trace);
    v.extend(d.violations);
    v.extend(recovery(trace));
    v.extend(transport_guard(trace));
    AuditReport { violations: v }
}

fn bad(check: &'static str, ev: &TraceEvent, message: impl Into<String>) -> Violation {
    Violation {
        check,
        t: ev.t,
        message: message.into(),
    }
}

fn first(ev: &TraceEvent) -> &str {
    ev.subjects.first().map_or("", String::as_str)
}

fn is_loss(ev: &TraceEvent) -> bool {
    ev.kind == "fault_injected" && ev.str_detail("fault") == Some("loss")
}

/// Container ids on a step record: every subject but the shipment id.
fn step_containers(ev: &TraceEvent) -> &[String] {
    ev.subjects.get(1..).unwrap_or(&[])
}

pub fn clock(trace: &Trace) -> Vec<Violation> {
    trace
        .events()
        .windows(2)
        .filter(|w| w[1].t < w[0].t)
        .map(|w| bad("clock", &w[1], format!("time {} after {}", w[1].t, w[0].t)))
        .collect()
}

/// Every message goes to an adjacent layer or the same layer on the same
/// node, or from layer 1 to layer 1 between nodes. Only the kernel (layer
/// 0) may address any layer. A sender must itself have been addressed.
pub fn layering(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut reached: BTreeSet<(String, u64)> = BTreeSet::new();
    for ev in trace.of_kind("pdu") {
        let to_node = ev.str_detail("to_node").unwrap_or_default();
        let Some(to_layer) = ev.u64_detail("to_layer") else {
            out.push(bad("layering", ev, "pdu without to_layer"));
            continue;
        };
        let from_layer = u64::from(ev.layer);
        if from_layer != 0 {
            if !reached.contains(&(ev.node.clone(), from_layer)) {
                out.push(bad("layering", ev, format!("L{from_layer}@{} sends before it was addressed", ev.node)));
            }
            let local = ev.node == to_node && from_layer.abs_diff(to_layer) <= 1;
            let wire = ev.node != to_node && from_layer == 1 && to_layer == 1;
            if !(local || wire) {
                out.push(bad(
                    "layering",
                    ev,
                    format!("{} L{from_layer}@{} -> L{to_layer}@{to_node}", ev.str_detail("msg").unwrap_or("?"), ev.node),
                ));
            }
        }
        if !(1..=7).contains(&to_layer) && to_layer != 0 {
            out.push(bad("layering", ev, format!("no layer {to_layer}")));
        }
        reached.insert((to_node.to_owned(), to_layer));
    }
    out
}

/// Each delivered container went 7 to 1 at the node that filled it and 1 to 7
/// at the node that emptied it.
pub fn descent_ascent(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut filled_at: BTreeMap<&str, (&str, Minutes)> = BTreeMap::new();
    // (container, node, from layer, to layer) -> times
    let mut hops: BTreeMap<(&str, &str, u64, u64), Vec<Minutes>> = BTreeMap::new();
    for ev in trace.events() {
        match ev.kind.as_str() {
            "container_filled" => {
                filled_at.insert(first(ev), (ev.node.as_str(), ev.t));
            }
            "pdu" => {
                let to_layer = ev.u64_detail("to_layer").unwrap_or(0);
                if ev.str_detail("to_node") != Some(ev.node.as_str()) {
                    continue;
                }
                for c in &ev.subjects {
                    hops.entry((c.as_str(), ev.node.as_str(), u64::from(ev.layer), to_layer)).or_default().push(ev.t);
                }
            }
            "container_emptied" => {
                let c = first(ev);
                let Some((origin, since)) = filled_at.get(c).copied() else {
                    out.push(bad("descent_ascent", ev, format!("{c} emptied but never filled")));
                    continue;
                };
                let seen = |node: &str, a: u64, b: u64| {
                    hops.get(&(c, node, a, b))
                        .is_some_and(|ts| ts.iter().any(|t| *t >= since && *t <= ev.t))
                };
                for l in (2..=7).rev() {
                    if !seen(origin, l, l - 1) {
                        out.push(bad("descent_ascent", ev, format!("{c}: no L{l}->L{} at consignor {origin}", l - 1)));
                    }
                }
                for l in 1..7 {
                    if !seen(&ev.node, l, l + 1) {
                        out.push(bad("descent_ascent", ev, format!("{c}: no L{l}->L{} at consignee {}", l + 1, ev.node)));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

const BUCKETS: [&str; 5] = ["depot", "site", "transit", "disposal", "lost"];

/// Replays every census move and checks each snapshot against the replay and
/// the conservation identity.
pub fn census(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut created = 0u64;
    let mut counts: BTreeMap<String, i64> = BUCKETS.iter().map(|b| ((*b).to_owned(), 0)).collect();
    let mut at: BTreeMap<String, String> = BTreeMap::new();
    for ev in trace.events() {
        match ev.kind.as_str() {
            "container_created" => created += 1,
            "census_move" => {
                let c = first(ev).to_owned();
                let to = ev.str_detail("to").unwrap_or_default().to_owned();
                let from = ev.str_detail("from").map(str::to_owned);
                if at.get(&c) != from.as_ref() {
                    out.push(bad("census", ev, format!("{c} moves from {from:?} but is in {:?}", at.get(&c))));
                }
                if at.get(&c).map(String::as_str) == Some("lost") {
                    out.push(bad("census", ev, format!("{c} leaves the lost bucket")));
                }
                if let Some(f) = at.get(&c) {
                    *counts.get_mut(f).expect("bucket") -= 1;
                }
                match counts.get_mut(&to) {
                    Some(n) => *n += 1,
                    None => out.push(bad("census", ev, format!("unknown bucket {to}"))),
                }
                at.insert(c, to);
            }
            "census" => {
                let snap_created = ev.u64_detail("created").unwrap_or(u64::MAX);
                if snap_created != created {
                    out.push(bad("census", ev, format!("created {snap_created} but {created} creation records")));
                }
                let mut sum = 0u64;
                for b in BUCKETS {
                    let n = ev.u64_detail(b).unwrap_or(u64::MAX);
                    sum = sum.saturating_add(n);
                    if n as i64 != counts[b] {
                        out.push(bad("census", ev, format!("{b} {n} but replay gives {}", counts[b])));
                    }
                }
                if sum != snap_created {
                    out.push(bad("census", ev, format!("created {snap_created} != buckets {sum}")));
                }
            }
            _ => {}
        }
    }
    if (at.len() as u64) != created {
        if let Some(last) = trace.events().last() {
            out.push(bad("census", last, format!("{created} created but {} placed", at.len())));
        }
    }
    out
}

/// Limits come from the registration records, not the step records.
pub fn capacity(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut limits: BTreeMap<&str, (u64, f64)> = BTreeMap::new();
    let mut weights: BTreeMap<&str, f64> = BTreeMap::new();
    let mut open: BTreeMap<&str, &str> = BTreeMap::new();
    let mut stowed: BTreeMap<&str, &TraceEvent> = BTreeMap::new();
    for ev in trace.events() {
        match ev.kind.as_str() {
            "mean_registered" => {
                limits.insert(
                    first(ev),
                    (ev.u64_detail("capacity").unwrap_or(0), ev.f64_detail("max_weight").unwrap_or(0.0)),
                );
            }
            "stowage_planned" => {
                stowed.insert(first(ev), ev);
                if let Some(serde_json::Value::Array(stacks)) = ev.details.get("stacks") {
                    let ws = ev.details.get("weights").and_then(|w| w.as_array());
                    for (s, stack) in stacks.iter().enumerate() {
                        for (i, c) in stack.as_array().into_iter().flatten().enumerate() {
                            let w = ws.and_then(|ws| ws.get(s)?.get(i)?.as_f64()).unwrap_or(0.0);
                            if let Some(c) = c.as_str() {
                                weights.insert(c, w);
                            }
                        }
                    }
                }
            }
            "step_depart" => {
                let mean = ev.str_detail("mean").unwrap_or_default();
                let Some((cap, max_w)) = limits.get(mean).copied() else {
                    out.push(bad("capacity", ev, format!("unregistered mean {mean}")));
                    continue;
                };
                let cs = step_containers(ev);
                if cs.len() as u64 > cap {
                    out.push(bad("capacity", ev, format!("{mean} carries {} > {cap}", cs.len())));
                }
                let w: f64 = cs.iter().map(|c| weights.get(c.as_str()).copied().unwrap_or(0.0)).sum();
                let claimed = ev.f64_detail("weight").unwrap_or(f64::INFINITY);
                if w > max_w + 1e-9 || claimed > max_w + 1e-9 {
                    out.push(bad("capacity", ev, format!("{mean} carries weight {w} > {max_w}")));
                }
                if (w - claimed).abs() > 1e-6 {
                    out.push(bad("capacity", ev, format!("step weight {claimed} but stowed weight {w}")));
                }
                let sid = first(ev);
                if !stowed.contains_key(sid) {
                    out.push(bad("capacity", ev, format!("{sid} departs without a stowage plan")));
                }
                if let Some(prev) = open.insert(mean, sid) {
                    out.push(bad("capacity", ev, format!("{mean} departs with {sid} while {prev} is under way")));
                }
            }
            "step_arrive" | "step_aborted" => {
                let mean = ev.str_detail("mean").unwrap_or_default();
                open.remove(mean);
            }
            _ => {}
        }
    }
    out
}

/// Executed plans: heights, weights non-increasing upward, nothing on a
/// fragile container, and exactly the containers that depart.
pub fn stowage(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut plans: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for ev in trace.events() {
        match ev.kind.as_str() {
            "stowage_planned" => {
                let max_h = ev.u64_detail("max_height").unwrap_or(1) as usize;
                let stacks = ev.details.get("stacks").and_then(|s| s.as_array()).cloned().unwrap_or_default();
                let weights = ev.details.get("weights").and_then(|s| s.as_array()).cloned().unwrap_or_default();
                let fragile = ev.details.get("fragile").and_then(|s| s.as_array()).cloned().unwrap_or_default();
                let mut ids = BTreeSet::new();
                for (s, stack) in stacks.iter().enumerate() {
                    let stack = stack.as_array().cloned().unwrap_or_default();
                    if stack.len() > max_h.max(1) {
                        out.push(bad("stowage", ev, format!("stack {s} height {} > {max_h}", stack.len())));
                    }
                    let w: Vec<f64> = weights.get(s).and_then(|x| x.as_array()).into_iter().flatten().filter_map(|x| x.as_f64()).collect();
                    let f: Vec<bool> = fragile.get(s).and_then(|x| x.as_array()).into_iter().flatten().filter_map(|x| x.as_bool()).collect();
                    if w.len() != stack.len() || f.len() != stack.len() {
                        out.push(bad("stowage", ev, format!("stack {s} attributes incomplete")));
                        continue;
                    }
                    for i in 1..stack.len() {
                        if w[i] > w[i - 1] {
                            out.push(bad("stowage", ev, format!("stack {s}: heavier container above level {}", i - 1)));
                        }
                        if f[i - 1] {
                            out.push(bad("stowage", ev, format!("stack {s}: container on fragile level {}", i - 1)));
                        }
                    }
                    for c in &stack {
                        if let Some(c) = c.as_str() {
                            if !ids.insert(c.to_owned()) {
                                out.push(bad("stowage", ev, format!("{c} stowed twice")));
                            }
                        }
                    }
                }
                plans.insert(first(ev), ids);
            }
            "step_depart" => {
                let cs: BTreeSet<String> = step_containers(ev).iter().cloned().collect();
                match plans.get(first(ev)) {
                    Some(p) if *p == cs => {}
                    Some(_) => out.push(bad("stowage", ev, format!("{} departs with containers not in its plan", first(ev)))),
                    None => out.push(bad("stowage", ev, format!("{} has no plan", first(ev)))),
                }
            }
            _ => {}
        }
    }
    out
}

/// start, then handovers from the current holder, then end; each step under
/// the custody of the mean's operator.
pub fn custody(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut holder: BTreeMap<&str, &str> = BTreeMap::new();
    let mut ended: BTreeSet<&str> = BTreeSet::new();
    let mut operator: BTreeMap<&str, &str> = BTreeMap::new();
    for ev in trace.events() {
        let c = first(ev);
        match ev.kind.as_str() {
            "mean_registered" => {
                operator.insert(c, ev.str_detail("operator").unwrap_or_default());
            }
            "custody_start" => {
                if let Some(h) = holder.get(c) {
                    out.push(bad("custody", ev, format!("{c} starts custody while held by {h}")));
                }
                holder.insert(c, ev.str_detail("operator").unwrap_or_default());
                ended.remove(c);
            }
            "handover" => {
                let from = ev.str_detail("from").unwrap_or_default();
                let to = ev.str_detail("to").unwrap_or_default();
                match holder.get(c) {
                    Some(h) if *h == from && from != to => {
                        holder.insert(c, to);
                    }
                    other => out.push(bad("custody", ev, format!("{c} handed over from {from} but held by {other:?}"))),
                }
            }
            "custody_end" => {
                match holder.remove(c) {
                    Some(h) if Some(h) == ev.str_detail("operator") => {}
                    other => out.push(bad("custody", ev, format!("{c} custody ends but held by {other:?}"))),
                }
                ended.insert(c);
            }
            "step_depart" => {
                let mean = ev.str_detail("mean").unwrap_or_default();
                let op = operator.get(mean).copied().unwrap_or_default();
                for c in step_containers(ev) {
                    if holder.get(c.as_str()) != Some(&op) {
                        out.push(bad("custody", ev, format!("{c} departs on {mean} ({op}) but held by {:?}", holder.get(c.as_str()))));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
enum Place {
    Node(String),
    Mean(String),
    Gone,
}

/// Location history per container is a node, mean, node, ... chain.
pub fn contiguity(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut at: BTreeMap<&str, Place> = BTreeMap::new();
    for ev in trace.events() {
        match ev.kind.as_str() {
            "container_created" => {
                at.insert(first(ev), Place::Node(ev.str_detail("at").unwrap_or_default().to_owned()));
            }
            "step_depart" => {
                let from = ev.str_detail("from").unwrap_or_default();
                let mean = ev.str_detail("mean").unwrap_or_default();
                for c in step_containers(ev) {
                    match at.get(c.as_str()) {
                        Some(Place::Node(n)) if n == from => {}
                        other => out.push(bad("contiguity", ev, format!("{c} departs {from} from {other:?}"))),
                    }
                    at.insert(c, Place::Mean(mean.to_owned()));
                }
            }
            "step_arrive" | "step_aborted" => {
                let mean = ev.str_detail("mean").unwrap_or_default();
                let to = match ev.kind.as_str() {
                    "step_arrive" => ev.str_detail("to"),
                    _ => ev.str_detail("back_to"),
                }
                .unwrap_or_default();
                for c in step_containers(ev) {
                    match at.get(c.as_str()) {
                        Some(Place::Mean(m)) if m == mean => {}
                        other => out.push(bad("contiguity", ev, format!("{c} leaves {mean} but is at {other:?}"))),
                    }
                    at.insert(c, Place::Node(to.to_owned()));
                }
            }
            _ if is_loss(ev) => {
                at.insert(first(ev), Place::Gone);
            }
            _ => {}
        }
    }
    out
}

/// A lost container never moves, fills or empties again.
pub fn lost_stay_lost(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut lost: BTreeSet<&str> = BTreeSet::new();
    for ev in trace.events() {
        match ev.kind.as_str() {
            _ if is_loss(ev) => {
                lost.insert(first(ev));
            }
            "step_depart" | "step_arrive" | "container_filled" | "container_emptied" | "shipment_built" => {
                let ids: Vec<&str> = match ev.kind.as_str() {
                    "step_depart" | "step_arrive" => step_containers(ev).iter().map(String::as_str).collect(),
                    "shipment_built" => ev
                        .details
                        .get("containers")
                        .and_then(|x| x.as_array())
                        .into_iter()
                        .flatten()
                        .filter_map(|x| x.as_str())
                        .collect(),
                    _ => vec![first(ev)],
                };
                for c in ids {
                    if lost.contains(c) {
                        out.push(bad("lost_stay_lost", ev, format!("lost {c} appears in {}", ev.kind)));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Goods go into and come out of containers at layer 7 only.
pub fn containerization(trace: &Trace) -> Vec<Violation> {
    trace
        .events()
        .iter()
        .filter(|e| matches!(e.kind.as_str(), "container_filled" | "container_emptied") && e.layer != 7)
        .map(|e| bad("containerization", e, format!("{} at layer {}", e.kind, e.layer)))
        .collect()
}

/// Perishable goods only ever ride in reefer containers.
pub fn reefer(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut perishable: BTreeSet<&str> = BTreeSet::new();
    let mut class: BTreeMap<&str, &str> = BTreeMap::new();
    for ev in trace.events() {
        match ev.kind.as_str() {
            "container_created" => {
                class.insert(first(ev), ev.str_detail("class").unwrap_or_default());
            }
            "container_filled" => {
                let c = first(ev);
                if ev.bool_detail("perishable") == Some(true) {
                    perishable.insert(c);
                    if class.get(c) != Some(&"reefer") {
                        out.push(bad("reefer", ev, format!("perishable goods in {c} of class {:?}", class.get(c))));
                    }
                }
            }
            "container_emptied" => {
                perishable.remove(first(ev));
            }
            "step_depart" => {
                for c in step_containers(ev) {
                    if perishable.contains(c.as_str()) && class.get(c.as_str()) != Some(&"reefer") {
                        out.push(bad("reefer", ev, format!("perishable {c} moves in a non-reefer container")));
                    }
                }
            }
            _ => {}
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeadlineAudit {
    /// Loads the simulator flagged late.
    pub flagged: BTreeSet<String>,
    /// Loads an independent scan finds late.
    pub scanned: BTreeSet<String>,
    pub violations: Vec<Violation>,
}

/// Late means: every container arrived or was lost and the last arrival came
/// after the deadline; or still under way with the deadline before the
/// horizon. Loads whose containers were all lost are failed, not late.
pub fn deadlines(trace: &Trace) -> DeadlineAudit {
    struct L<'a> {
        containers: Vec<&'a str>,
        dst: &'a str,
        deadline: Minutes,
        built: Minutes,
    }
    let mut loads: BTreeMap<&str, L> = BTreeMap::new();
    // Containers are reused, so keep every arrival and match by time.
    let mut arrivals: BTreeMap<(&str, &str), Vec<Minutes>> = BTreeMap::new();
    let mut lost: BTreeSet<&str> = BTreeSet::new();
    let mut horizon = None;
    let mut a = DeadlineAudit::default();
    for ev in trace.events() {
        match ev.kind.as_str() {
            "load_built" if ev.str_detail("kind") == Some("customer") => {
                let containers = ev
                    .details
                    .get("containers")
                    .and_then(|x| x.as_array())
                    .into_iter()
                    .flatten()
                    .filter_map(|x| x.as_str())
                    .collect();
                loads.insert(
                    first(ev),
                    L {
                        containers,
                        dst: ev.str_detail("destination").unwrap_or_default(),
                        deadline: ev.u64_detail("deadline").unwrap_or(0),
                        built: ev.t,
                    },
                );
            }
            "step_arrive" => {
                for c in step_containers(ev) {
                    arrivals.entry((c.as_str(), ev.str_detail("to").unwrap_or_default())).or_default().push(ev.t);
                }
            }
            _ if is_loss(ev) => {
                lost.insert(first(ev));
            }
            "load_arrived" if ev.bool_detail("late") == Some(true) => {
                a.flagged.insert(first(ev).to_owned());
            }
            "deadline_overdue" => {
                a.flagged.insert(first(ev).to_owned());
            }
            RUN_END => horizon = ev.u64_detail("horizon"),
            _ => {}
        }
    }
    let Some(horizon) = horizon else {
        return a;
    };
    for (id, l) in &loads {
        let times: Vec<Option<Minutes>> = l
            .containers
            .iter()
            .map(|c| arrivals.get(&(*c, l.dst)).and_then(|ts| ts.iter().copied().find(|t| *t >= l.built)))
            .collect();
        let complete = l.containers.iter().zip(&times).all(|(c, t)| t.is_some() || lost.contains(c));
        let last = times.iter().flatten().max().copied();
        let late = match (complete, last) {
            (true, Some(t)) => t > l.deadline,
            (true, None) => false,
            (false, _) => l.deadline < horizon,
        };
        if late {
            a.scanned.insert((*id).to_owned());
        }
    }
    for id in a.flagged.symmetric_difference(&a.scanned) {
        let t = trace.events().last().map_or(0, |e| e.t);
        a.violations.push(Violation {
            check: "deadlines",
            t,
            message: format!(
                "{id}: ledger says {}, scan says {}",
                if a.flagged.contains(id) { "late" } else { "on time" },
                if a.scanned.contains(id) { "late" } else { "on time" }
            ),
        });
    }
    a
}

/// Resend exactly when an intact, unclaimed spare with the same goods sat at
/// the recovering node.
pub fn recovery(trace: &Trace) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut goods: BTreeMap<&str, (String, u64)> = BTreeMap::new();
    let mut spares: BTreeMap<&str, &str> = BTreeMap::new();
    for ev in trace.events() {
        let c = first(ev);
        match ev.kind.as_str() {
            "container_filled" => {
                goods.insert(
                    c,
                    (ev.str_detail("product_code").unwrap_or_default().to_owned(), ev.u64_detail("quantity").unwrap_or(0)),
                );
            }
            "spare_stored" => {
                spares.insert(c, ev.node.as_str());
            }
            "fault_injected" | "orphan_detected" | "spare_released" => {
                spares.remove(c);
            }
            "loss_recovery" => {
                let want = goods.get(c).cloned();
                let matching = spares
                    .iter()
                    .any(|(s, node)| *node == ev.node && goods.get(s).cloned() == want && want.is_some());
                let action = ev.str_detail("action").unwrap_or_default();
                if (action == "resend") != matching {
                    out.push(bad("recovery", ev, format!("{c}: action {action} but matching spare present = {matching}")));
                }
                if action == "resend" {
                    let spare = ev.str_detail("spare").unwrap_or_default();
                    match spares.iter().find(|(s, _)| **s == spare).map(|(s, _)| *s) {
                        Some(s) if goods.get(s).cloned() == want => {
                            spares.remove(s);
                        }
                        _ => out.push(bad("recovery", ev, format!("{c}: resent spare {spare} is not a matching spare"))),
                    }
                }
            }
            _ => {}
        }
    }
    out
}

pub fn transport_guard(trace: &Trace) -> Vec<Violation> {
    trace
        .of_kind("transport_guard")
        .map(|e| bad("transport_guard", e, format!("load {} refused by the transport guard", first(e))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{parse_scenario, tests::MINIMAL};
    use crate::sim::{run, RunOptions};

    #[test]
    fn minimal_run_is_clean() {
        let r = run(&parse_scenario(MINIMAL).unwrap(), &RunOptions::default());
        let a = audit(&r.trace);
        assert!(a.passed(), "{:#?}", a.violations);
    }

    #[test]
    fn bad_layer_jump_is_caught() {
        let mut t = Trace::new();
        t.push(TraceEvent::new(0, "*", 0, "pdu").detail("to_node", "A").detail("to_layer", 7u64).detail("msg", "release"));
        t.push(TraceEvent::new(0, "A", 7, "pdu").detail("to_node", "A").detail("to_layer", 5u64).detail("msg", "x"));
        assert_eq!(layering(&t).len(), 1);
    }
}
