//! Run metrics, computed from the trace alone in one pass.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::ids::Minutes;
use crate::kernel::Trace;
use crate::trace_io::{TraceReadError, RUN_END};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrderCounts {
    pub total: u64,
    pub delivered: u64,
    pub failed: u64,
    pub in_flight: u64,
    /// Delivered after their deadline.
    pub late: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Costs {
    /// Normal-mode cost of steps carrying customer goods.
    pub transport: f64,
    /// Extra paid for expedited steps.
    pub expedite: f64,
    /// Normal-mode cost of steps moving empties, damaged returns and orphans.
    pub repositioning: f64,
    /// Reshipping plus penalty for every recovered loss.
    pub loss: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrphanCounts {
    pub detected: u64,
    pub held: u64,
    pub routed: u64,
    pub disposed: u64,
    pub stranded: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadlineMiss {
    pub load: String,
    pub deadline: Minutes,
    /// None when still under way at the horizon.
    pub arrival: Option<Minutes>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub horizon: Minutes,
    pub orders: OrderCounts,
    pub end_to_end_mean: f64,
    pub end_to_end_max: Minutes,
    pub costs: Costs,
    pub utilization: BTreeMap<String, f64>,
    /// Empty containers sent between depots.
    pub reposition_moves: u64,
    pub orphans: OrphanCounts,
    pub deadline_misses: Vec<DeadlineMiss>,
}

#[derive(Default)]
struct OrderRow {
    created: Minutes,
    settled: Option<Minutes>,
    late: bool,
    failed: bool,
}

pub fn summarize(trace: &Trace) -> Result<MetricsReport, TraceReadError> {
    let mut r = MetricsReport::default();
    if trace.is_empty() {
        return Ok(r);
    }
    let mut orders: BTreeMap<String, OrderRow> = BTreeMap::new();
    let mut steps: BTreeMap<String, (String, Minutes, Option<Minutes>)> = BTreeMap::new();
    let mut ended = false;
    for ev in trace.events() {
        let first = || ev.subjects.first().cloned().unwrap_or_default();
        match ev.kind.as_str() {
            "mean_registered" => {
                r.utilization.insert(first(), 0.0);
            }
            "order_created" if ev.str_detail("kind") == Some("customer") => {
                orders.insert(
                    first(),
                    OrderRow {
                        created: ev.t,
                        ..OrderRow::default()
                    },
                );
            }
            "order_settled" => {
                if let Some(o) = orders.get_mut(&first()) {
                    o.settled = Some(ev.t);
                    o.late = ev.bool_detail("late").unwrap_or(false);
                }
            }
            "order_failed" => {
                if let Some(o) = orders.get_mut(&first()) {
                    o.failed = true;
                }
            }
            "step_depart" => {
                r.costs.transport += ev.f64_detail("cost_customer").unwrap_or(0.0);
                r.costs.repositioning += ev.f64_detail("cost_internal").unwrap_or(0.0);
                r.costs.expedite += ev.f64_detail("premium").unwrap_or(0.0);
                let mean = ev.str_detail("mean").unwrap_or_default().to_owned();
                steps.insert(ev.str_detail("shipment").unwrap_or_default().to_owned(), (mean, ev.t, None));
            }
            "step_arrive" | "step_aborted" => {
                if let Some(s) = steps.get_mut(ev.str_detail("shipment").unwrap_or_default()) {
                    s.2 = Some(ev.t);
                }
            }
            "loss_recovery" => r.costs.loss += ev.f64_detail("extra_cost").unwrap_or(0.0),
            "reposition_dispatched" => r.reposition_moves += ev.subjects.len() as u64,
            "orphan_detected" => r.orphans.detected += 1,
            "orphan_held" => r.orphans.held += 1,
            "orphan_routed" => r.orphans.routed += 1,
            "orphan_disposed" => r.orphans.disposed += 1,
            "orphan_stranded" => r.orphans.stranded += 1,
            "load_arrived" if ev.bool_detail("late") == Some(true) => r.deadline_misses.push(DeadlineMiss {
                load: first(),
                deadline: ev.u64_detail("deadline").unwrap_or(0),
                arrival: ev.u64_detail("arrival"),
            }),
            "deadline_overdue" => r.deadline_misses.push(DeadlineMiss {
                load: first(),
                deadline: ev.u64_detail("deadline").unwrap_or(0),
                arrival: None,
            }),
            RUN_END => {
                ended = true;
                r.horizon = ev.u64_detail("horizon").unwrap_or(ev.t);
            }
            _ => {}
        }
    }
    if !ended {
        return Err(TraceReadError::Truncated(format!("no {RUN_END} record")));
    }
    r.costs.total = r.costs.transport + r.costs.expedite + r.costs.repositioning + r.costs.loss;

    let mut e2e_sum = 0u64;
    for o in orders.values() {
        r.orders.total += 1;
        match (o.settled, o.failed) {
            (Some(t), _) => {
                r.orders.delivered += 1;
                r.orders.late += u64::from(o.late);
                let d = t - o.created;
                e2e_sum += d;
                r.end_to_end_max = r.end_to_end_max.max(d);
            }
            (None, true) => r.orders.failed += 1,
            (None, false) => r.orders.in_flight += 1,
        }
    }
    if r.orders.delivered > 0 {
        r.end_to_end_mean = e2e_sum as f64 / r.orders.delivered as f64;
    }

    let mut busy: BTreeMap<String, Minutes> = BTreeMap::new();
    for (mean, start, end) in steps.values() {
        let end = end.unwrap_or(r.horizon).min(r.horizon);
        *busy.entry(mean.clone()).or_default() += end.saturating_sub(*start);
    }
    if r.horizon > 0 {
        for (mean, b) in busy {
            r.utilization.insert(mean, b as f64 / r.horizon as f64);
        }
    }
    r.deadline_misses.sort_by(|a, b| a.load.cmp(&b.load));
    Ok(r)
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let o = &self.orders;
        let c = &self.costs;
        let rows: Vec<(String, String)> = vec![
            ("horizon".into(), self.horizon.to_string()),
            ("orders".into(), o.total.to_string()),
            ("  delivered".into(), o.delivered.to_string()),
            ("  failed".into(), o.failed.to_string()),
            ("  in flight".into(), o.in_flight.to_string()),
            ("  late".into(), o.late.to_string()),
            ("end-to-end mean".into(), format!("{:.1}", self.end_to_end_mean)),
            ("end-to-end max".into(), self.end_to_end_max.to_string()),
            ("cost transport".into(), format!("{:.2}", c.transport)),
            ("cost expedite".into(), format!("{:.2}", c.expedite)),
            ("cost repositioning".into(), format!("{:.2}", c.repositioning)),
            ("cost loss".into(), format!("{:.2}", c.loss)),
            ("cost total".into(), format!("{:.2}", c.total)),
            ("reposition moves".into(), self.reposition_moves.to_string()),
            (
                "orphans".into(),
                format!(
                    "detected {} held {} routed {} disposed {} stranded {}",
                    self.orphans.detected, self.orphans.held, self.orphans.routed, self.orphans.disposed, self.orphans.stranded
                ),
            ),
            ("deadline misses".into(), self.deadline_misses.len().to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<22}{v}");
        }
        for (m, u) in &self.utilization {
            let _ = writeln!(s, "{:<22}{:.3}", format!("utilization {m}"), u);
        }
        for d in &self.deadline_misses {
            let arrival = d.arrival.map_or("-".to_owned(), |a| a.to_string());
            let _ = writeln!(s, "{:<22}deadline {} arrival {}", format!("  late {}", d.load), d.deadline, arrival);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::TraceEvent;

    fn end(t: Minutes, horizon: Minutes) -> TraceEvent {
        TraceEvent::new(t, "*", 0, RUN_END).detail("horizon", horizon)
    }

    #[test]
    fn empty_trace_zero_report() {
        assert_eq!(summarize(&Trace::new()).unwrap(), MetricsReport::default());
    }

    #[test]
    fn one_on_time_delivery() {
        let mut t = Trace::new();
        t.push(TraceEvent::new(0, "A", 0, "mean_registered").subject("T1"));
        t.push(TraceEvent::new(0, "B", 0, "mean_registered").subject("T2"));
        t.push(TraceEvent::new(0, "A", 5, "order_created").subject("O1").detail("kind", "customer"));
        t.push(
            TraceEvent::new(0, "A", 1, "step_depart")
                .detail("shipment", "S1")
                .detail("mean", "T1")
                .detail("cost_customer", 5.0)
                .detail("cost_internal", 0.0)
                .detail("premium", 0.0),
        );
        t.push(TraceEvent::new(250, "C", 1, "step_arrive").detail("shipment", "S1"));
        t.push(TraceEvent::new(300, "C", 5, "order_settled").subject("O1").detail("late", false));
        t.push(end(300, 1000));
        let r = summarize(&t).unwrap();
        assert_eq!((r.orders.delivered, r.orders.late, r.orders.total), (1, 0, 1));
        assert_eq!(r.end_to_end_max, 300);
        assert_eq!(r.utilization["T1"], 0.25);
        assert_eq!(r.utilization["T2"], 0.0);
        assert_eq!(r.costs.total, 5.0);
    }

    #[test]
    fn missing_end_is_truncated() {
        let mut t = Trace::new();
        t.push(TraceEvent::new(0, "A", 5, "order_created").subject("O1").detail("kind", "customer"));
        assert_eq!(summarize(&t).unwrap_err().code(), "truncated_trace");
    }

    #[test]
    fn counts_reconcile() {
        let mut t = Trace::new();
        for o in ["O1", "O2", "O3"] {
            t.push(TraceEvent::new(0, "A", 5, "order_created").subject(o).detail("kind", "customer"));
        }
        t.push(TraceEvent::new(1, "A", 5, "order_failed").subject("O2"));
        t.push(TraceEvent::new(2, "A", 5, "order_settled").subject("O1").detail("late", true));
        t.push(end(5, 5));
        let r = summarize(&t).unwrap();
        assert_eq!(r.orders.delivered + r.orders.failed + r.orders.in_flight, r.orders.total);
        assert_eq!(r.orders.late, 1);
    }
}
