//! Scenario documents: schema, strict parsing, reference resolution and
//! cross-checks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{check_compatibility, ClassId, ContainerClass, MeanKind, MeanState, MilestonePayment, PiMean, Product};
use crate::ids::{CarrierId, DemandId, MeanId, Minutes, Money, NodeId};
use crate::kernel::{ContainerRef, Fault, FaultSpec, FaultTime};
use crate::layers::container::DepotState;
use crate::report::CheckReport;
use crate::routing::{CriteriaWeights, Disruption, EdgeAttrs, EdgeRef, LogisticsGraph, NodeAttrs, NodeKind, RoutingError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("parse_error at {path} (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("unresolved_reference: {what} {id}")]
    Unresolved { what: &'static str, id: String },
    #[error("invalid_param: {field}: {reason}")]
    InvalidParam { field: String, reason: String },
    /// A demand names more than one receiver. Only unicast is supported.
    #[error("multicast_consignee: demand {demand} names {consignees:?}")]
    MulticastConsignee { demand: DemandId, consignees: Vec<String> },
}

impl ScenarioError {
    pub fn code(&self) -> &'static str {
        match self {
            ScenarioError::Parse { .. } => "parse_error",
            ScenarioError::SchemaVersion(_) => "schema_version",
            ScenarioError::Unresolved { .. } => "unresolved_reference",
            ScenarioError::InvalidParam { .. } => "invalid_param",
            ScenarioError::MulticastConsignee { .. } => "multicast_consignee",
        }
    }
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
    ScenarioError::InvalidParam {
        field: field.into(),
        reason: reason.into(),
    }
}

fn unresolved(what: &'static str, id: impl ToString) -> ScenarioError {
    ScenarioError::Unresolved {
        what,
        id: id.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub nodes: Vec<NodeAttrs>,
    #[serde(default)]
    pub edges: Vec<EdgeAttrs>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanSpec {
    pub id: MeanId,
    pub kind: MeanKind,
    pub container_capacity: u32,
    pub max_total_weight: f64,
    #[serde(default = "one")]
    pub speed: f64,
    pub home_node: NodeId,
    /// Defaults to the mean's own id: an independent carrier.
    #[serde(default)]
    pub operator: Option<CarrierId>,
}

impl MeanSpec {
    pub fn to_mean(&self) -> PiMean {
        PiMean {
            mean_id: self.id.clone(),
            kind: self.kind,
            container_capacity: self.container_capacity,
            max_total_weight: self.max_total_weight,
            speed: self.speed,
            home_node: self.home_node.clone(),
            operator: self.operator.clone().unwrap_or_else(|| CarrierId::new(self.id.as_str())),
            state: MeanState::Idle,
            location: self.home_node.clone(),
        }
    }
}

/// As written in the document; anything but a single plain id is rejected
/// when the scenario is resolved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConsigneeSpec {
    One(String),
    Many(Vec<String>),
}

impl ConsigneeSpec {
    fn names(&self) -> Vec<String> {
        match self {
            ConsigneeSpec::One(s) => s.split(',').map(|p| p.trim().to_owned()).collect(),
            ConsigneeSpec::Many(v) => v.clone(),
        }
    }

    pub fn single(&self) -> Option<NodeId> {
        match self.names().as_slice() {
            [one] if one != "*" && !one.is_empty() => Some(NodeId::new(one.as_str())),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaymentSpec {
    /// Per container.
    #[serde(default)]
    pub total: Money,
    #[serde(default)]
    pub intermediate: Vec<MilestonePayment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Demand {
    pub demand_id: DemandId,
    /// Goods for one container.
    pub product: Product,
    #[serde(default)]
    pub container_class: Option<ClassId>,
    pub consignor: NodeId,
    pub consignee: ConsigneeSpec,
    pub deadline: Minutes,
    #[serde(default = "one_u8")]
    pub priority: u8,
    #[serde(default = "one_u32")]
    pub containers: u32,
    #[serde(default)]
    pub release_at: Minutes,
    /// Container indices where a new sub-order starts.
    #[serde(default)]
    pub sub_order_boundaries: Vec<u32>,
    #[serde(default)]
    pub payment: PaymentSpec,
    /// Extra identical containers filled and kept at the consignor.
    #[serde(default)]
    pub spares: u32,
}

impl Demand {
    /// Valid after [`parse_scenario`] succeeded.
    pub fn consignee(&self) -> NodeId {
        self.consignee.single().expect("resolved scenario has unicast consignees")
    }

    pub fn class(&self) -> ClassId {
        self.container_class.unwrap_or_else(|| ClassId::required_for(&self.product))
    }

    pub fn suborder_of(&self, index: u32) -> u32 {
        self.sub_order_boundaries.iter().filter(|b| **b <= index).count() as u32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FaultEntry {
    Breakdown {
        #[serde(default)]
        at: Option<Minutes>,
        #[serde(default)]
        window: Option<[Minutes; 2]>,
        mean: MeanId,
    },
    Delay {
        #[serde(default)]
        at: Option<Minutes>,
        #[serde(default)]
        window: Option<[Minutes; 2]>,
        mean: MeanId,
        extra_minutes: Minutes,
    },
    Damage {
        #[serde(default)]
        at: Option<Minutes>,
        #[serde(default)]
        window: Option<[Minutes; 2]>,
        container: ContainerRef,
    },
    Loss {
        #[serde(default)]
        at: Option<Minutes>,
        #[serde(default)]
        window: Option<[Minutes; 2]>,
        container: ContainerRef,
    },
    Orphan {
        #[serde(default)]
        at: Option<Minutes>,
        #[serde(default)]
        window: Option<[Minutes; 2]>,
        container: ContainerRef,
    },
    Edge {
        #[serde(default)]
        at: Option<Minutes>,
        #[serde(default)]
        window: Option<[Minutes; 2]>,
        from: NodeId,
        to: NodeId,
        disruption: Disruption,
    },
}

impl FaultEntry {
    fn timing(&self) -> (Option<Minutes>, Option<[Minutes; 2]>) {
        match self {
            FaultEntry::Breakdown { at, window, .. }
            | FaultEntry::Delay { at, window, .. }
            | FaultEntry::Damage { at, window, .. }
            | FaultEntry::Loss { at, window, .. }
            | FaultEntry::Orphan { at, window, .. }
            | FaultEntry::Edge { at, window, .. } => (*at, *window),
        }
    }

    pub fn to_spec(&self) -> FaultSpec {
        let time = match self.timing() {
            (Some(t), _) => FaultTime::At(t),
            (None, Some([lo, hi])) => FaultTime::Window(lo, hi),
            (None, None) => FaultTime::At(0),
        };
        let fault = match self.clone() {
            FaultEntry::Breakdown { mean, .. } => Fault::MeanBreakdown { mean },
            FaultEntry::Delay { mean, extra_minutes, .. } => Fault::MeanDelay { mean, extra_minutes },
            FaultEntry::Damage { container, .. } => Fault::Damage { container },
            FaultEntry::Loss { container, .. } => Fault::Loss { container },
            FaultEntry::Orphan { container, .. } => Fault::Orphan { container },
            FaultEntry::Edge { from, to, disruption, .. } => Fault::Edge {
                edge: EdgeRef { from, to },
                disruption,
            },
        };
        FaultSpec { time, fault }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub weights: CriteriaWeights,
    pub max_set_size: Option<usize>,
    pub max_load_size: usize,
    pub max_block_size: usize,
    pub deadline_window: Minutes,
    pub reorder_delay: Minutes,
    pub loss_penalty: Money,
    pub max_stack_height: usize,
    pub allow_expedite: bool,
    /// Events strictly before this minute run.
    pub horizon: Minutes,
    pub seed: u64,
    pub disposal_node: Option<NodeId>,
    pub pareto_bound: usize,
    pub intra_node_handling: bool,
    /// Re-run empty repositioning every this many minutes; 0 means once.
    pub reposition_interval: Minutes,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            weights: CriteriaWeights::default(),
            max_set_size: None,
            max_load_size: 20,
            max_block_size: 10,
            deadline_window: 1440,
            reorder_delay: 2880,
            loss_penalty: 10.0,
            max_stack_height: 4,
            allow_expedite: false,
            horizon: 43_200,
            seed: 0,
            disposal_node: None,
            pareto_bound: crate::routing::DEFAULT_PARETO_BOUND,
            intra_node_handling: false,
            reposition_interval: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub graph: GraphSection,
    #[serde(default)]
    pub container_classes: Vec<ContainerClass>,
    #[serde(default)]
    pub means: Vec<MeanSpec>,
    #[serde(default)]
    pub depots: Vec<DepotState>,
    #[serde(default)]
    pub demands: Vec<Demand>,
    #[serde(default)]
    pub faults: Vec<FaultEntry>,
    #[serde(default)]
    pub params: Params,
}

fn one() -> f64 {
    1.0
}

fn one_u8() -> u8 {
    1
}

fn one_u32() -> u32 {
    1
}

impl Scenario {
    pub fn build_graph(&self) -> Result<LogisticsGraph, ScenarioError> {
        LogisticsGraph::from_parts(self.graph.nodes.clone(), self.graph.edges.clone()).map_err(|e| match e {
            RoutingError::UnknownNode(n) => unresolved("node", n),
            other => invalid("graph", other.to_string()),
        })
    }

    /// Declared classes override the built-in ones.
    pub fn classes(&self) -> BTreeMap<ClassId, ContainerClass> {
        let mut out: BTreeMap<ClassId, ContainerClass> =
            ClassId::ALL.iter().map(|c| (*c, ContainerClass::default_for(*c))).collect();
        for c in &self.container_classes {
            out.insert(c.class_id, *c);
        }
        out
    }

    pub fn means(&self) -> Vec<PiMean> {
        self.means.iter().map(MeanSpec::to_mean).collect()
    }

    /// The designated disposal node, or every disposal-kind node.
    pub fn disposal_candidates(&self) -> Vec<NodeId> {
        match &self.params.disposal_node {
            Some(n) => vec![n.clone()],
            None => self
                .graph
                .nodes
                .iter()
                .filter(|n| n.kind == NodeKind::Disposal)
                .map(|n| n.node_id.clone())
                .collect(),
        }
    }

    pub fn fault_specs(&self) -> Vec<FaultSpec> {
        self.faults.iter().map(FaultEntry::to_spec).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Strict parse plus reference and range checks.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ScenarioError::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    resolve(&scenario)?;
    Ok(scenario)
}

/// Everything beyond syntax that makes a scenario unusable.
pub fn resolve(s: &Scenario) -> Result<(), ScenarioError> {
    if s.schema_version != SCHEMA_VERSION {
        return Err(ScenarioError::SchemaVersion(s.schema_version));
    }
    // Unicast first: a duplicated demand with another receiver is multicast too.
    let mut seen: BTreeMap<&DemandId, &Demand> = BTreeMap::new();
    for d in &s.demands {
        if d.consignee.single().is_none() {
            return Err(ScenarioError::MulticastConsignee {
                demand: d.demand_id.clone(),
                consignees: d.consignee.names(),
            });
        }
        if let Some(prev) = seen.insert(&d.demand_id, d) {
            if prev.consignee() != d.consignee() {
                return Err(ScenarioError::MulticastConsignee {
                    demand: d.demand_id.clone(),
                    consignees: vec![prev.consignee().0, d.consignee().0],
                });
            }
            return Err(invalid(format!("demands.{}", d.demand_id), "duplicate demand_id"));
        }
    }

    for e in &s.graph.edges {
        e.validate().map_err(|r| invalid(format!("graph.edges.{}->{}", e.from, e.to), r))?;
    }
    let graph = s.build_graph()?;
    let node = |what: &'static str, id: &NodeId| -> Result<(), ScenarioError> {
        if graph.contains(id) {
            Ok(())
        } else {
            Err(unresolved(what, id))
        }
    };

    for c in &s.container_classes {
        c.validate().map_err(|e| invalid("container_classes", e.to_string()))?;
    }
    let classes = s.classes();

    let mut mean_ids = BTreeSet::new();
    for m in &s.means {
        if !mean_ids.insert(&m.id) {
            return Err(invalid(format!("means.{}", m.id), "duplicate id"));
        }
        node("node", &m.home_node)?;
        m.to_mean().validate().map_err(|e| invalid(format!("means.{}", m.id), e.to_string()))?;
    }

    let mut depot_nodes = BTreeSet::new();
    for d in &s.depots {
        node("node", &d.node_id)?;
        if !depot_nodes.insert(&d.node_id) {
            return Err(invalid(format!("depots.{}", d.node_id), "duplicate depot"));
        }
        d.validate().map_err(|r| invalid(format!("depots.{}", d.node_id), r))?;
    }

    for d in &s.demands {
        let field = |f: &str| format!("demands.{}.{f}", d.demand_id);
        node("node", &d.consignor)?;
        node("node", &d.consignee())?;
        if d.consignor == d.consignee() {
            return Err(invalid(field("consignee"), "equals consignor"));
        }
        d.product.validate().map_err(|e| invalid(field("product"), e.to_string()))?;
        if d.containers == 0 {
            return Err(invalid(field("containers"), "must be >= 1"));
        }
        if d.deadline == 0 {
            return Err(invalid(field("deadline"), "must be > 0"));
        }
        let class = &classes[&d.class()];
        let fit = check_compatibility(&d.product, class);
        if !fit.passed() {
            return Err(invalid(field("container_class"), fit.codes().join(",")));
        }
        let mut prev = 0;
        for b in &d.sub_order_boundaries {
            if *b <= prev || *b >= d.containers {
                return Err(invalid(field("sub_order_boundaries"), "must be increasing and inside 1..containers"));
            }
            prev = *b;
        }
        let p = &d.payment;
        let milestones: f64 = p.intermediate.iter().map(|m| m.amount).sum();
        if p.total < 0.0 || p.intermediate.iter().any(|m| m.amount < 0.0) || milestones > p.total {
            return Err(invalid(field("payment"), "amounts must be >= 0 and milestones within total"));
        }
    }

    for (i, f) in s.faults.iter().enumerate() {
        let field = format!("faults[{i}]");
        match f.timing() {
            (Some(_), None) => {}
            (None, Some([lo, hi])) if lo <= hi => {}
            (None, Some(_)) => return Err(invalid(field, "window lower bound above upper")),
            _ => return Err(invalid(field, "exactly one of at / window required")),
        }
        match f {
            FaultEntry::Breakdown { mean, .. } | FaultEntry::Delay { mean, .. } => {
                if !mean_ids.contains(mean) {
                    return Err(unresolved("mean", mean));
                }
                if let FaultEntry::Delay { extra_minutes: 0, .. } = f {
                    return Err(invalid(field, "extra_minutes must be > 0"));
                }
            }
            FaultEntry::Damage { container, .. } | FaultEntry::Loss { container, .. } | FaultEntry::Orphan { container, .. } => {
                if let ContainerRef::Slot { demand, index } = container {
                    let d = seen.get(demand).ok_or_else(|| unresolved("demand", demand))?;
                    if *index >= d.containers {
                        return Err(invalid(field, format!("demand {demand} has {} containers", d.containers)));
                    }
                }
            }
            FaultEntry::Edge { from, to, .. } => {
                if graph.edge(from, to).is_none() {
                    return Err(unresolved("edge", format!("{from}->{to}")));
                }
            }
        }
    }

    let p = &s.params;
    p.weights.validate().map_err(|e| invalid("params.weights", e.to_string()))?;
    for (name, v) in [
        ("params.max_load_size", p.max_load_size),
        ("params.max_block_size", p.max_block_size),
        ("params.max_stack_height", p.max_stack_height),
    ] {
        if v == 0 {
            return Err(invalid(name, "must be >= 1"));
        }
    }
    if p.max_set_size == Some(0) {
        return Err(invalid("params.max_set_size", "must be >= 1"));
    }
    if !(p.loss_penalty > 0.0 && p.loss_penalty.is_finite()) {
        return Err(invalid("params.loss_penalty", "must be > 0"));
    }
    if !(1..=20).contains(&p.pareto_bound) {
        return Err(invalid("params.pareto_bound", "must be in 1..=20"));
    }
    if let Some(n) = &p.disposal_node {
        node("node", n)?;
    }
    Ok(())
}

pub mod finding {
    pub const UNREACHABLE: &str = "unreachable";
    pub const REEFER_SHORTAGE: &str = "reefer_shortage";
    pub const HAZMAT_SHORTAGE: &str = "hazmat_shortage";
    pub const STANDARD_SHORTAGE: &str = "standard_shortage";
    pub const DANGEROUS_DESTINATION: &str = "dangerous_destination";
    pub const NO_REEFER_PLUGS: &str = "no_reefer_plugs";
    pub const NO_DISPOSAL_NODE: &str = "no_disposal_node";
    pub const NO_MEANS: &str = "no_means";
}

/// Cross-checks on a resolved scenario. Errors make a run pointless; warnings
/// describe demand the simulator will withhold or leave waiting.
pub fn validate_scenario(s: &Scenario) -> CheckReport {
    let mut report = CheckReport::new();
    let graph = match s.build_graph() {
        Ok(g) => g,
        Err(e) => {
            report.fail("invalid_graph", e.to_string());
            return report;
        }
    };

    let mut reach: BTreeMap<&NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    let mut need: BTreeMap<ClassId, u64> = BTreeMap::new();
    for d in &s.demands {
        let to = d.consignee();
        let r = reach.entry(&d.consignor).or_insert_with(|| graph.reachable_from(&d.consignor));
        if !r.contains(&to) {
            report.fail(
                finding::UNREACHABLE,
                format!("demand {}: {} cannot reach {}", d.demand_id, d.consignor, to),
            );
        }
        *need.entry(d.class()).or_default() += u64::from(d.containers + d.spares);
        let dest = graph.node(&to).expect("resolved");
        if d.product.dangerous && !dest.accepts_dangerous {
            report.warn(
                finding::DANGEROUS_DESTINATION,
                format!("demand {}: {} refuses dangerous goods; containers will be withheld", d.demand_id, to),
            );
        }
        if d.class() == ClassId::Reefer && dest.reefer_plugs == 0 {
            report.warn(
                finding::NO_REEFER_PLUGS,
                format!("demand {}: {} has no reefer plugs; containers will be withheld", d.demand_id, to),
            );
        }
    }
    for (class, wanted) in need {
        let stock: u64 = s.depots.iter().map(|d| u64::from(d.stock(class))).sum();
        if wanted > stock {
            let code = match class {
                ClassId::Reefer => finding::REEFER_SHORTAGE,
                ClassId::Hazmat => finding::HAZMAT_SHORTAGE,
                ClassId::Standard => finding::STANDARD_SHORTAGE,
            };
            report.warn(code, format!("{wanted} {} containers wanted, {stock} in stock", class.as_str()));
        }
    }
    let orphans = s.faults.iter().any(|f| matches!(f, FaultEntry::Orphan { .. }));
    if orphans && s.disposal_candidates().is_empty() {
        report.warn(finding::NO_DISPOSAL_NODE, "orphan faults declared but no disposal node");
    }
    if !s.demands.is_empty() && !s.means.iter().any(|m| !m.kind.is_handling_gear()) {
        report.warn(finding::NO_MEANS, "demands declared but no conveyance");
    }
    report
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
      "schema_version": 1,
      "graph": {
        "nodes": [{"id": "A", "kind": "consignor_site"}, {"id": "C", "kind": "consignee_site"}],
        "edges": [{"from": "A", "to": "C", "base_time": 60, "base_cost": 5}]
      },
      "means": [{"id": "T1", "kind": "truck", "container_capacity": 4, "max_total_weight": 100000, "home_node": "A"}],
      "depots": [{"node_id": "A", "empty_stock": {"standard": 4}}],
      "demands": [{
        "demand_id": "D1",
        "product": {"product_code": "P", "quantity": 10, "unit_weight": 100, "unit_volume": 1},
        "consignor": "A", "consignee": "C", "deadline": 600
      }]
    }"#;

    #[test]
    fn minimal_gets_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.params, Params::default());
        assert_eq!(s.demands[0].containers, 1);
        assert_eq!(s.means()[0].operator.as_str(), "T1");
        assert!(validate_scenario(&s).passed());
    }

    #[test]
    fn unknown_node_named() {
        let text = MINIMAL.replace(r#""consignee": "C""#, r#""consignee": "Q""#);
        assert_eq!(
            parse_scenario(&text).unwrap_err(),
            ScenarioError::Unresolved {
                what: "node",
                id: "Q".into()
            }
        );
    }

    #[test]
    fn negative_base_time_invalid() {
        let text = MINIMAL.replace(r#""base_time": 60"#, r#""base_time": -1"#);
        assert_eq!(parse_scenario(&text).unwrap_err().code(), "invalid_param");
    }

    #[test]
    fn unknown_key_rejected_with_path() {
        let text = MINIMAL.replace(r#""deadline": 600"#, r#""deadline": 600, "colour": "red""#);
        match parse_scenario(&text).unwrap_err() {
            ScenarioError::Parse { path, .. } => assert!(path.starts_with("demands[0]"), "{path}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn multicast_forms_rejected() {
        for form in [r#"["C", "A"]"#, r#""*""#, r#""C,A""#] {
            let text = MINIMAL.replace(r#""consignee": "C""#, &format!(r#""consignee": {form}"#));
            assert_eq!(parse_scenario(&text).unwrap_err().code(), "multicast_consignee", "{form}");
        }
        let single_list = MINIMAL.replace(r#""consignee": "C""#, r#""consignee": ["C"]"#);
        assert!(parse_scenario(&single_list).is_ok());
    }

    #[test]
    fn round_trip() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(parse_scenario(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn reefer_shortage_warned() {
        let text = MINIMAL.replace(r#""unit_volume": 1}"#, r#""unit_volume": 1, "perishable": true}"#);
        let text = text.replace(r#"{"id": "C", "kind": "consignee_site"}"#, r#"{"id": "C", "kind": "consignee_site", "reefer_plugs": 2}"#);
        let r = validate_scenario(&parse_scenario(&text).unwrap());
        assert!(r.has(finding::REEFER_SHORTAGE));
        assert!(r.passed());
    }

    #[test]
    fn disconnected_is_error() {
        let text = MINIMAL.replace(r#""from": "A", "to": "C""#, r#""from": "C", "to": "A""#);
        let r = validate_scenario(&parse_scenario(&text).unwrap());
        assert!(r.has(finding::UNREACHABLE));
        assert!(!r.passed());
    }

    #[test]
    fn fault_needs_timing() {
        let text = MINIMAL.replace(r#""demands""#, r#""faults": [{"kind": "breakdown", "mean": "T1"}], "demands""#);
        assert_eq!(parse_scenario(&text).unwrap_err().code(), "invalid_param");
        let ok = MINIMAL.replace(r#""demands""#, r#""faults": [{"kind": "loss", "window": [5, 9], "container": {"demand": "D1", "index": 0}}], "demands""#);
        let s = parse_scenario(&ok).unwrap();
        assert_eq!(s.fault_specs()[0].time, FaultTime::Window(5, 9));
    }
}
