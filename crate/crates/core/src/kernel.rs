//! Event queue, clock, trace sink and fault plan.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::ids::{ContainerId, DemandId, MeanId, Minutes, NodeId};
use crate::routing::{Disruption, EdgeRef};

/// Priorities inside one minute. Layers use their own number.
pub mod priority {
    pub const BOOTSTRAP: u8 = 0;
    /// Idle-mean housekeeping after all layer traffic of the minute.
    pub const HOUSEKEEPING: u8 = 8;
    pub const FAULT: u8 = 9;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("time_travel: event at {at} scheduled when clock is {clock}")]
    TimeTravel { at: Minutes, clock: Minutes },
    #[error("out_of_order_event: {0}")]
    OutOfOrder(String),
    #[error("layer abort: {0}")]
    Abort(String),
}

impl KernelError {
    pub fn code(&self) -> &'static str {
        match self {
            KernelError::TimeTravel { .. } => "time_travel",
            KernelError::OutOfOrder(_) => "out_of_order_event",
            KernelError::Abort(_) => "abort",
        }
    }
}

/// Node and layer an event is delivered to; layer 0 is the kernel itself.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Target {
    pub node: NodeId,
    pub layer: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event<P> {
    pub time: Minutes,
    pub priority: u8,
    pub seq: u64,
    pub target: Target,
    pub payload: P,
}

struct Entry<P>(Event<P>);

impl<P> Entry<P> {
    fn key(&self) -> (Minutes, u8, u64) {
        (self.0.time, self.0.priority, self.0.seq)
    }
}

impl<P> PartialEq for Entry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<P> Eq for Entry<P> {}

impl<P> PartialOrd for Entry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Entry<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Pops in strict (time, priority, seq) order.
pub struct EventQueue<P> {
    heap: BinaryHeap<Reverse<Entry<P>>>,
    clock: Minutes,
    next_seq: u64,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        Self {
            heap: BinaryHeap::new(),
            clock: 0,
            next_seq: 0,
        }
    }
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> Minutes {
        self.clock
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn schedule(&mut self, time: Minutes, priority: u8, target: Target, payload: P) -> Result<u64, KernelError> {
        if time < self.clock {
            return Err(KernelError::TimeTravel { at: time, clock: self.clock });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry(Event {
            time,
            priority,
            seq,
            target,
            payload,
        })));
        Ok(seq)
    }

    pub fn peek_time(&self) -> Option<Minutes> {
        self.heap.peek().map(|Reverse(e)| e.0.time)
    }

    pub fn pop(&mut self) -> Option<Event<P>> {
        let Reverse(Entry(ev)) = self.heap.pop()?;
        self.clock = ev.time;
        Some(ev)
    }

    /// Pops the next event only if it is strictly before `horizon`.
    pub fn pop_before(&mut self, horizon: Minutes) -> Option<Event<P>> {
        if self.peek_time()? >= horizon {
            return None;
        }
        self.pop()
    }
}

/// One trace record. Field order is the serialized key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEvent {
    pub t: Minutes,
    pub node: String,
    pub layer: u8,
    pub kind: String,
    pub subjects: Vec<String>,
    pub details: BTreeMap<String, Value>,
}

impl TraceEvent {
    pub fn new(t: Minutes, node: impl Into<String>, layer: u8, kind: impl Into<String>) -> Self {
        Self {
            t,
            node: node.into(),
            layer,
            kind: kind.into(),
            subjects: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn subject(mut self, s: impl ToString) -> Self {
        self.subjects.push(s.to_string());
        self
    }

    pub fn subjects<I, S>(mut self, it: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        self.subjects.extend(it.into_iter().map(|s| s.to_string()));
        self
    }

    pub fn detail(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.details.insert(key.to_owned(), value.into());
        self
    }

    pub fn str_detail(&self, key: &str) -> Option<&str> {
        self.details.get(key)?.as_str()
    }

    pub fn u64_detail(&self, key: &str) -> Option<u64> {
        self.details.get(key)?.as_u64()
    }

    pub fn f64_detail(&self, key: &str) -> Option<f64> {
        self.details.get(key)?.as_f64()
    }

    pub fn bool_detail(&self, key: &str) -> Option<bool> {
        self.details.get(key)?.as_bool()
    }

    pub fn list_detail(&self, key: &str) -> Vec<String> {
        match self.details.get(key) {
            Some(Value::Array(xs)) => xs.iter().filter_map(|x| x.as_str().map(str::to_owned)).collect(),
            _ => Vec::new(),
        }
    }
}

/// Append-only; clock never goes backwards.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: Vec<TraceEvent>) -> Self {
        Self { events }
    }

    pub fn push(&mut self, ev: TraceEvent) {
        debug_assert!(self.events.last().is_none_or(|l| l.t <= ev.t), "trace time went backwards");
        self.events.push(ev);
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a TraceEvent> + 'a {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn into_events(self) -> Vec<TraceEvent> {
        self.events
    }
}

/// A container named directly or as the n-th container filled for a demand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ContainerRef {
    Id(ContainerId),
    Slot { demand: DemandId, index: u32 },
}

impl std::fmt::Display for ContainerRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ContainerRef::Id(id) => write!(f, "{id}"),
            ContainerRef::Slot { demand, index } => write!(f, "{demand}#{index}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fault {
    MeanBreakdown { mean: MeanId },
    MeanDelay { mean: MeanId, extra_minutes: Minutes },
    Damage { container: ContainerRef },
    Loss { container: ContainerRef },
    Orphan { container: ContainerRef },
    Edge { edge: EdgeRef, disruption: Disruption },
}

impl Fault {
    pub fn name(&self) -> &'static str {
        match self {
            Fault::MeanBreakdown { .. } => "breakdown",
            Fault::MeanDelay { .. } => "delay",
            Fault::Damage { .. } => "damage",
            Fault::Loss { .. } => "loss",
            Fault::Orphan { .. } => "orphan",
            Fault::Edge { .. } => "edge",
        }
    }
}

/// When a fault fires: a fixed minute or a seeded draw from a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultTime {
    At(Minutes),
    Window(Minutes, Minutes),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaultSpec {
    pub time: FaultTime,
    pub fault: Fault,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultPlan {
    pub entries: Vec<(Minutes, Fault)>,
}

impl FaultPlan {
    /// Resolves windows with one ChaCha8 stream seeded from `seed`, drawn in
    /// declaration order. Fixed times consume nothing from the stream.
    pub fn resolve(specs: &[FaultSpec], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = specs
            .iter()
            .map(|s| {
                let t = match s.time {
                    FaultTime::At(t) => t,
                    FaultTime::Window(lo, hi) => rng.random_range(lo..=hi.max(lo)),
                };
                (t, s.fault.clone())
            })
            .collect();
        Self { entries }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tgt() -> Target {
        Target {
            node: "A".into(),
            layer: 1,
        }
    }

    #[test]
    fn pops_in_time_priority_seq_order() {
        let mut q = EventQueue::new();
        q.schedule(5, 3, tgt(), "late").unwrap();
        q.schedule(1, 7, tgt(), "b").unwrap();
        q.schedule(1, 1, tgt(), "a").unwrap();
        q.schedule(1, 7, tgt(), "c").unwrap();
        let order: Vec<&str> = std::iter::from_fn(|| q.pop().map(|e| e.payload)).collect();
        assert_eq!(order, vec!["a", "b", "c", "late"]);
        assert_eq!(q.clock(), 5);
    }

    #[test]
    fn same_minute_runs_before_next() {
        let mut q = EventQueue::new();
        q.schedule(3, 1, tgt(), 1).unwrap();
        q.pop();
        q.schedule(4, 0, tgt(), 2).unwrap();
        q.schedule(3, 9, tgt(), 3).unwrap();
        assert_eq!(q.pop().unwrap().payload, 3);
    }

    #[test]
    fn past_is_time_travel() {
        let mut q = EventQueue::new();
        q.schedule(10, 1, tgt(), ()).unwrap();
        q.pop();
        assert_eq!(
            q.schedule(9, 1, tgt(), ()),
            Err(KernelError::TimeTravel { at: 9, clock: 10 })
        );
    }

    #[test]
    fn horizon_is_exclusive() {
        let mut q = EventQueue::new();
        q.schedule(0, 0, tgt(), ()).unwrap();
        assert!(q.pop_before(0).is_none());
        assert!(q.pop_before(1).is_some());
    }

    #[test]
    fn window_draws_depend_on_seed_only() {
        let specs = vec![
            FaultSpec {
                time: FaultTime::Window(0, 1000),
                fault: Fault::MeanBreakdown { mean: "m".into() },
            },
            FaultSpec {
                time: FaultTime::At(7),
                fault: Fault::MeanBreakdown { mean: "m".into() },
            },
        ];
        let a = FaultPlan::resolve(&specs, 1);
        assert_eq!(a, FaultPlan::resolve(&specs, 1));
        assert_eq!(a.entries[1].0, 7);
        let draws: Vec<Minutes> = (0..8).map(|s| FaultPlan::resolve(&specs, s).entries[0].0).collect();
        assert!(draws.iter().all(|t| *t <= 1000));
        assert!(draws.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn trace_event_key_order() {
        let e = TraceEvent::new(3, "A", 2, "x").subject("c1").detail("z", 1).detail("a", "b");
        assert_eq!(
            serde_json::to_string(&e).unwrap(),
            r#"{"t":3,"node":"A","layer":2,"kind":"x","subjects":["c1"],"details":{"a":"b","z":1}}"#
        );
    }
}
