//! Layer 1: scheduling containers on a mean, stowage, and step timing.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{MeanKind, PiMean};
use crate::ids::{ContainerId, MeanId, Minutes, ShipmentId};
use crate::routing::Hop;

pub const DEFAULT_MAX_STACK_HEIGHT: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicalError {
    #[error("cannot stow {fragile} fragile containers in {stacks} stacks")]
    Unstackable { fragile: usize, stacks: usize },
}

/// What the scheduler needs to know about a shipment offered to a mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub shipment_id: ShipmentId,
    pub count: u32,
    pub weight: f64,
}

/// Takes candidates in arrival order while both limits hold; the first one
/// that would break a limit and everything after it go back to waiting.
pub fn schedule_on_mean(mean: &PiMean, candidates: &[Candidate]) -> (Vec<ShipmentId>, Vec<ShipmentId>) {
    let mut count = 0u32;
    let mut weight = 0.0;
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for c in candidates {
        let fits = rejected.is_empty()
            && count + c.count <= mean.container_capacity
            && weight + c.weight <= mean.max_total_weight;
        if fits {
            count += c.count;
            weight += c.weight;
            accepted.push(c.shipment_id.clone());
        } else {
            rejected.push(c.shipment_id.clone());
        }
    }
    (accepted, rejected)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StowItem {
    pub container_id: ContainerId,
    pub weight: f64,
    pub fragile: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StowagePlan {
    pub mean_id: MeanId,
    /// Bottom to top.
    pub stacks: Vec<Vec<ContainerId>>,
}

impl StowagePlan {
    /// Every item placed once, weights non-increasing upward, nothing on a
    /// fragile container, no stack taller than `max_height`.
    pub fn check(&self, items: &[StowItem], max_height: usize) -> Result<(), String> {
        let by_id: BTreeMap<&ContainerId, &StowItem> = items.iter().map(|i| (&i.container_id, i)).collect();
        let mut seen = BTreeSet::new();
        for (s, stack) in self.stacks.iter().enumerate() {
            if stack.len() > max_height.max(1) {
                return Err(format!("stack {s} has height {} > {max_height}", stack.len()));
            }
            for (level, id) in stack.iter().enumerate() {
                let item = by_id.get(id).ok_or_else(|| format!("{id} not in shipment"))?;
                if !seen.insert(id) {
                    return Err(format!("{id} placed twice"));
                }
                if let Some(above) = stack.get(level + 1) {
                    if item.fragile {
                        return Err(format!("{above} stowed on fragile {id}"));
                    }
                    let upper = by_id.get(above).map_or(0.0, |i| i.weight);
                    if upper > item.weight {
                        return Err(format!("{above} ({upper}) heavier than {id} ({}) below it", item.weight));
                    }
                }
            }
        }
        if seen.len() != by_id.len() {
            return Err(format!("{} of {} containers placed", seen.len(), by_id.len()));
        }
        Ok(())
    }
}

/// Ships get stacks: sorted by weight, dealt round-robin into
/// ceil(n / max_stack_height) stacks, fragile containers on top. Other
/// means carry one layer.
pub fn plan_stowage(mean: &PiMean, items: &[StowItem], max_stack_height: usize) -> Result<StowagePlan, PhysicalError> {
    let mut sorted: Vec<&StowItem> = items.iter().collect();
    sorted.sort_by(|a, b| b.weight.total_cmp(&a.weight).then_with(|| a.container_id.cmp(&b.container_id)));
    if mean.kind != MeanKind::Ship {
        return Ok(StowagePlan {
            mean_id: mean.mean_id.clone(),
            stacks: sorted.iter().map(|i| vec![i.container_id.clone()]).collect(),
        });
    }
    let h = max_stack_height.max(1);
    let k = sorted.len().div_ceil(h);
    let (fragile, solid): (Vec<&StowItem>, Vec<&StowItem>) = sorted.iter().partition(|i| i.fragile);
    if fragile.len() > k {
        return Err(PhysicalError::Unstackable {
            fragile: fragile.len(),
            stacks: k,
        });
    }
    let mut stacks: Vec<Vec<&StowItem>> = vec![Vec::new(); k];
    for (n, item) in solid.into_iter().enumerate() {
        stacks[n % k].push(item);
    }
    // Heaviest fragile onto the heaviest top with room; empty stacks first.
    for item in fragile {
        let slot = stacks
            .iter_mut()
            .filter(|s| s.len() < h && s.last().is_none_or(|top| !top.fragile && top.weight >= item.weight))
            .max_by(|a, b| {
                let wa = a.last().map_or(f64::INFINITY, |t| t.weight);
                let wb = b.last().map_or(f64::INFINITY, |t| t.weight);
                wa.total_cmp(&wb).then(std::cmp::Ordering::Greater)
            });
        match slot {
            Some(s) => s.push(item),
            None => {
                return Err(PhysicalError::Unstackable {
                    fragile: items.iter().filter(|i| i.fragile).count(),
                    stacks: k,
                })
            }
        }
    }
    Ok(StowagePlan {
        mean_id: mean.mean_id.clone(),
        stacks: stacks
            .into_iter()
            .filter(|s| !s.is_empty())
            .map(|s| s.into_iter().map(|i| i.container_id.clone()).collect())
            .collect(),
    })
}

/// Whole minutes a hop takes, rounded up.
pub fn step_duration(hop: &Hop) -> Minutes {
    hop.time().ceil().max(0.0) as Minutes
}

/// Minutes for handling gear to move `count` containers inside a node.
/// Gear speed is in batches per hour, a batch being its capacity.
pub fn handling_duration(gear: &PiMean, count: usize) -> Minutes {
    let batches = count.div_ceil(gear.container_capacity.max(1) as usize) as f64;
    (batches * 60.0 / gear.speed).ceil() as Minutes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::MeanState;
    use crate::routing::{EdgeAttrs, Mode};

    fn mean(kind: MeanKind, cap: u32, max_w: f64) -> PiMean {
        PiMean {
            mean_id: "m1".into(),
            kind,
            container_capacity: cap,
            max_total_weight: max_w,
            speed: 2.0,
            home_node: "A".into(),
            operator: "X".into(),
            state: MeanState::Idle,
            location: "A".into(),
        }
    }

    fn cand(id: &str, count: u32, weight: f64) -> Candidate {
        Candidate {
            shipment_id: id.into(),
            count,
            weight,
        }
    }

    #[test]
    fn weight_limit_rejects_second() {
        let m = mean(MeanKind::Conveyor, 10, 28000.0);
        let (a, r) = schedule_on_mean(&m, &[cand("s1", 1, 20000.0)]);
        assert_eq!((a.len(), r.len()), (1, 0));
        let (a, r) = schedule_on_mean(&m, &[cand("s1", 1, 20000.0), cand("s2", 1, 10000.0)]);
        assert_eq!(a, vec![ShipmentId::from("s1")]);
        assert_eq!(r, vec![ShipmentId::from("s2")]);
    }

    fn item(id: &str, w: f64, fragile: bool) -> StowItem {
        StowItem {
            container_id: id.into(),
            weight: w,
            fragile,
        }
    }

    #[test]
    fn one_stack_sorted() {
        let items = [item("b", 20.0, false), item("c", 10.0, false), item("a", 30.0, false)];
        let p = plan_stowage(&mean(MeanKind::Ship, 10, 1e9), &items, 4).unwrap();
        assert_eq!(p.stacks, vec![vec![ContainerId::from("a"), "b".into(), "c".into()]]);
        p.check(&items, 4).unwrap();
    }

    #[test]
    fn fragile_goes_on_top() {
        let items = [item("f", 5.0, true), item("h1", 30.0, false), item("h2", 25.0, false)];
        let p = plan_stowage(&mean(MeanKind::Ship, 10, 1e9), &items, 4).unwrap();
        assert_eq!(p.stacks[0].last().unwrap().as_str(), "f");
        p.check(&items, 4).unwrap();
    }

    #[test]
    fn too_many_fragile() {
        let items = [item("f1", 5.0, true), item("f2", 5.0, true), item("h", 30.0, false)];
        assert_eq!(
            plan_stowage(&mean(MeanKind::Ship, 10, 1e9), &items, 4),
            Err(PhysicalError::Unstackable { fragile: 2, stacks: 1 })
        );
    }

    #[test]
    fn heavy_fragile_over_light_unstackable() {
        let items = [item("f", 50.0, true), item("l", 5.0, false)];
        assert!(plan_stowage(&mean(MeanKind::Ship, 10, 1e9), &items, 4).is_err());
    }

    #[test]
    fn trucks_get_one_layer() {
        let items = [item("f", 50.0, true), item("l", 5.0, false)];
        let p = plan_stowage(&mean(MeanKind::Truck, 10, 1e9), &items, 4).unwrap();
        assert!(p.stacks.iter().all(|s| s.len() == 1));
        p.check(&items, 1).unwrap();
    }

    #[test]
    fn checker_catches_bad_plans() {
        let items = [item("a", 10.0, false), item("b", 20.0, false)];
        let bad = StowagePlan {
            mean_id: "m".into(),
            stacks: vec![vec!["a".into(), "b".into()]],
        };
        assert!(bad.check(&items, 4).is_err());
        let missing = StowagePlan {
            mean_id: "m".into(),
            stacks: vec![vec!["b".into()]],
        };
        assert!(missing.check(&items, 4).is_err());
    }

    #[test]
    fn step_timing() {
        let e = EdgeAttrs::new("A", "B", 120.0, 1.0, 0.0).with_expedite(0.5, 2.0);
        assert_eq!(step_duration(&Hop { edge: e.clone(), mode: Mode::Normal }), 120);
        assert_eq!(step_duration(&Hop { edge: e, mode: Mode::Expedited }), 60);
        let odd = EdgeAttrs::new("A", "B", 2.5, 1.0, 0.0);
        assert_eq!(step_duration(&Hop { edge: odd, mode: Mode::Normal }), 3);
    }

    #[test]
    fn gear_handling_time() {
        // 2 batches per hour, capacity 10: 25 containers = 3 batches = 90 min
        assert_eq!(handling_duration(&mean(MeanKind::Crane, 10, 1e9), 25), 90);
    }
}
