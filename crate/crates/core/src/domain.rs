//! Physical objects and contracts shared by every layer.
//!
//! Three kinds of physical things exist: goods ([`Product`]), the envelopes
//! that carry them ([`PiContainer`]) and the movers ([`PiMean`]). Nothing here
//! has behavior beyond validation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{CarrierId, ContainerId, ContractId, MeanId, Minutes, Money, NodeId};
use crate::report::CheckReport;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    /// More than one receiver was named. Containers are unicast only.
    #[error("multicast consignee rejected: {0:?}")]
    MulticastConsignee(Vec<NodeId>),
    #[error("consignee list is empty")]
    NoConsignee,
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Product {
    pub product_code: String,
    #[serde(default)]
    pub description: String,
    pub quantity: u32,
    pub unit_weight: f64,
    pub unit_volume: f64,
    #[serde(default)]
    pub perishable: bool,
    #[serde(default)]
    pub fragile: bool,
    #[serde(default)]
    pub dangerous: bool,
}

impl Product {
    pub fn total_weight(&self) -> f64 {
        f64::from(self.quantity) * self.unit_weight
    }

    pub fn total_volume(&self) -> f64 {
        f64::from(self.quantity) * self.unit_volume
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.quantity < 1 {
            return Err(invalid("quantity", "must be >= 1"));
        }
        if !(self.unit_weight > 0.0) {
            return Err(invalid("unit_weight", "must be > 0"));
        }
        if !(self.unit_volume > 0.0) {
            return Err(invalid("unit_volume", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassId {
    Standard,
    Reefer,
    Hazmat,
}

impl ClassId {
    pub const ALL: [ClassId; 3] = [ClassId::Standard, ClassId::Reefer, ClassId::Hazmat];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassId::Standard => "standard",
            ClassId::Reefer => "reefer",
            ClassId::Hazmat => "hazmat",
        }
    }

    /// Class a product must travel in.
    pub fn required_for(product: &Product) -> ClassId {
        if product.perishable {
            ClassId::Reefer
        } else if product.dangerous {
            ClassId::Hazmat
        } else {
            ClassId::Standard
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContainerClass {
    pub class_id: ClassId,
    pub internal_volume: f64,
    pub max_payload: f64,
    pub tare_weight: f64,
}

impl ContainerClass {
    pub fn standard() -> Self {
        Self {
            class_id: ClassId::Standard,
            internal_volume: 33.0,
            max_payload: 28_000.0,
            tare_weight: 2_200.0,
        }
    }

    pub fn reefer() -> Self {
        Self {
            class_id: ClassId::Reefer,
            internal_volume: 28.0,
            max_payload: 27_000.0,
            tare_weight: 3_000.0,
        }
    }

    pub fn hazmat() -> Self {
        Self {
            class_id: ClassId::Hazmat,
            internal_volume: 33.0,
            max_payload: 26_000.0,
            tare_weight: 2_500.0,
        }
    }

    pub fn default_for(id: ClassId) -> Self {
        match id {
            ClassId::Standard => Self::standard(),
            ClassId::Reefer => Self::reefer(),
            ClassId::Hazmat => Self::hazmat(),
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if !(self.internal_volume > 0.0) {
            return Err(invalid("internal_volume", "must be > 0"));
        }
        if !(self.max_payload > 0.0) {
            return Err(invalid("max_payload", "must be > 0"));
        }
        if !(self.tare_weight > 0.0) {
            return Err(invalid("tare_weight", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Milestone {
    Departed,
    Arrived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MilestonePayment {
    pub milestone: Milestone,
    pub amount: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    pub contract_id: ContractId,
    pub consignor: NodeId,
    pub consignee: NodeId,
    pub product_code: String,
    pub quantity: u32,
    pub deadline: Minutes,
    /// Lower is more urgent.
    pub priority: u8,
    pub payment_total: Money,
    pub intermediate_payments: Vec<MilestonePayment>,
}

impl Contract {
    pub fn validate(&self) -> Result<(), DomainError> {
        let staged: Money = self.intermediate_payments.iter().map(|p| p.amount).sum();
        if self.payment_total < staged {
            return Err(invalid(
                "payment_total",
                format!("{} below intermediate sum {staged}", self.payment_total),
            ));
        }
        if self.intermediate_payments.iter().any(|p| p.amount < 0.0) {
            return Err(invalid("intermediate_payments", "negative amount"));
        }
        if self.deadline == 0 {
            return Err(invalid("deadline", "must be > 0"));
        }
        Ok(())
    }

    pub fn milestone_amount(&self, milestone: Milestone) -> Money {
        self.intermediate_payments
            .iter()
            .filter(|p| p.milestone == milestone)
            .map(|p| p.amount)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrity {
    Intact,
    Damaged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Node(NodeId),
    Mean(MeanId),
}

/// Resolve a consignee list to exactly one node.
pub fn single_consignee(list: &[NodeId]) -> Result<NodeId, DomainError> {
    match list {
        [] => Err(DomainError::NoConsignee),
        [one] => Ok(one.clone()),
        many => Err(DomainError::MulticastConsignee(many.to_vec())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiContainer {
    pub container_id: ContainerId,
    pub class: ContainerClass,
    contents: Option<Product>,
    pub consignor: Option<NodeId>,
    pub consignee: Option<NodeId>,
    pub contract: Option<Contract>,
    pub integrity: Integrity,
    pub location: Location,
}

impl PiContainer {
    pub fn empty(id: ContainerId, class: ContainerClass, at: NodeId) -> Self {
        Self {
            container_id: id,
            class,
            contents: None,
            consignor: None,
            consignee: None,
            contract: None,
            integrity: Integrity::Intact,
            location: Location::Node(at),
        }
    }

    pub fn builder(id: impl Into<ContainerId>, class: ContainerClass, at: impl Into<NodeId>) -> ContainerBuilder {
        ContainerBuilder {
            container: PiContainer::empty(id.into(), class, at.into()),
            consignees: Vec::new(),
        }
    }

    pub fn contents(&self) -> Option<&Product> {
        self.contents.as_ref()
    }

    pub fn is_filled(&self) -> bool {
        self.contents.is_some()
    }

    pub fn gross_weight(&self) -> f64 {
        self.class.tare_weight + self.contents.as_ref().map_or(0.0, Product::total_weight)
    }

    pub fn is_fragile(&self) -> bool {
        self.contents.as_ref().is_some_and(|p| p.fragile)
    }

    pub fn is_dangerous(&self) -> bool {
        self.contents.as_ref().is_some_and(|p| p.dangerous)
    }

    pub fn is_orphan(&self) -> bool {
        self.consignor.is_none() && self.consignee.is_none()
    }

    // Only the product layer changes contents.
    pub(crate) fn put_contents(&mut self, product: Product) {
        self.contents = Some(product);
    }

    pub(crate) fn take_contents(&mut self) -> Option<Product> {
        self.contents.take()
    }
}

pub struct ContainerBuilder {
    container: PiContainer,
    consignees: Vec<NodeId>,
}

impl ContainerBuilder {
    pub fn contents(mut self, product: Product) -> Self {
        self.container.contents = Some(product);
        self
    }

    pub fn consignor(mut self, node: impl Into<NodeId>) -> Self {
        self.container.consignor = Some(node.into());
        self
    }

    pub fn consignee(mut self, node: impl Into<NodeId>) -> Self {
        self.consignees.push(node.into());
        self
    }

    pub fn contract(mut self, contract: Contract) -> Self {
        self.container.contract = Some(contract);
        self
    }

    pub fn integrity(mut self, integrity: Integrity) -> Self {
        self.container.integrity = integrity;
        self
    }

    pub fn build(mut self) -> Result<PiContainer, DomainError> {
        if !self.consignees.is_empty() {
            self.container.consignee = Some(single_consignee(&self.consignees)?);
        }
        Ok(self.container)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanKind {
    Ship,
    Truck,
    Train,
    Crane,
    Conveyor,
}

impl MeanKind {
    /// Cranes and conveyors handle containers inside a node; they never traverse edges.
    pub fn is_handling_gear(self) -> bool {
        matches!(self, MeanKind::Crane | MeanKind::Conveyor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanState {
    Idle,
    Busy,
    Broken,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiMean {
    pub mean_id: MeanId,
    pub kind: MeanKind,
    pub container_capacity: u32,
    pub max_total_weight: f64,
    /// Handling gear only: batches per hour.
    pub speed: f64,
    pub home_node: NodeId,
    pub operator: CarrierId,
    pub state: MeanState,
    pub location: NodeId,
}

impl PiMean {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.container_capacity < 1 {
            return Err(invalid("container_capacity", "must be >= 1"));
        }
        if !(self.max_total_weight > 0.0) {
            return Err(invalid("max_total_weight", "must be > 0"));
        }
        if !(self.speed > 0.0) {
            return Err(invalid("speed", "must be > 0"));
        }
        Ok(())
    }
}

pub mod reason {
    pub const OVER_VOLUME: &str = "over_volume";
    pub const OVER_WEIGHT: &str = "over_weight";
    pub const NEEDS_REEFER: &str = "needs_reefer";
    pub const NEEDS_HAZMAT: &str = "needs_hazmat";
    pub const MISSING_CONTRACT: &str = "missing_contract";
    pub const MISSING_PARTIES: &str = "missing_parties";
    pub const CONTRACT_MISMATCH: &str = "contract_mismatch";
    pub const INVALID_CONTRACT: &str = "invalid_contract";
}

/// Can `product` travel in a container of `class`?
pub fn check_compatibility(product: &Product, class: &ContainerClass) -> CheckReport {
    let mut report = CheckReport::new();
    if product.total_volume() > class.internal_volume {
        report.fail(
            reason::OVER_VOLUME,
            format!("{} m3 > {} m3", product.total_volume(), class.internal_volume),
        );
    }
    if product.total_weight() > class.max_payload {
        report.fail(
            reason::OVER_WEIGHT,
            format!("{} kg > {} kg", product.total_weight(), class.max_payload),
        );
    }
    if product.perishable && class.class_id != ClassId::Reefer {
        report.fail(reason::NEEDS_REEFER, "perishable goods need a reefer");
    }
    if product.dangerous && class.class_id != ClassId::Hazmat {
        report.fail(reason::NEEDS_HAZMAT, "dangerous goods need a hazmat-rated class");
    }
    report
}

/// Checks the container invariants; one finding per violation.
pub fn validate_container(c: &PiContainer) -> CheckReport {
    let mut report = CheckReport::new();
    let Some(product) = c.contents() else {
        return report;
    };
    report.merge(check_compatibility(product, &c.class));
    match &c.contract {
        None => report.fail(reason::MISSING_CONTRACT, format!("{} filled without contract", c.container_id)),
        Some(contract) => {
            if let Err(e) = contract.validate() {
                report.fail(reason::INVALID_CONTRACT, e.to_string());
            }
            if contract.product_code != product.product_code || contract.quantity != product.quantity {
                report.fail(reason::CONTRACT_MISMATCH, "contract does not describe contents");
            }
            if c.consignor.as_ref() != Some(&contract.consignor) || c.consignee.as_ref() != Some(&contract.consignee) {
                report.fail(reason::MISSING_PARTIES, "container parties differ from contract");
            }
        }
    }
    report
}

fn invalid(field: &'static str, reason: impl Into<String>) -> DomainError {
    DomainError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn product(quantity: u32, unit_weight: f64, unit_volume: f64) -> Product {
        Product {
            product_code: "P".into(),
            description: String::new(),
            quantity,
            unit_weight,
            unit_volume,
            perishable: false,
            fragile: false,
            dangerous: false,
        }
    }

    fn contract_for(p: &Product) -> Contract {
        Contract {
            contract_id: "K1".into(),
            consignor: "A".into(),
            consignee: "C".into(),
            product_code: p.product_code.clone(),
            quantity: p.quantity,
            deadline: 100,
            priority: 1,
            payment_total: 100.0,
            intermediate_payments: vec![],
        }
    }

    #[test]
    fn volume_fits_standard() {
        let r = check_compatibility(&product(10, 1.0, 1.0), &ContainerClass::standard());
        assert!(!r.has(reason::OVER_VOLUME));
        assert!(r.passed());
    }

    #[test]
    fn perishable_needs_reefer() {
        let mut p = product(1, 1.0, 1.0);
        p.perishable = true;
        let r = check_compatibility(&p, &ContainerClass::standard());
        assert!(!r.passed());
        assert!(r.has(reason::NEEDS_REEFER));
        assert!(check_compatibility(&p, &ContainerClass::reefer()).passed());
    }

    #[test]
    fn over_weight_detected() {
        let r = check_compatibility(&product(10, 3000.0, 1.0), &ContainerClass::standard());
        assert_eq!(r.codes(), vec![reason::OVER_WEIGHT]);
    }

    #[test]
    fn dangerous_needs_hazmat() {
        let mut p = product(1, 1.0, 1.0);
        p.dangerous = true;
        assert!(check_compatibility(&p, &ContainerClass::standard()).has(reason::NEEDS_HAZMAT));
    }

    #[test]
    fn empty_container_without_contract_passes() {
        let c = PiContainer::empty("X".into(), ContainerClass::standard(), "A".into());
        assert!(validate_container(&c).passed());
    }

    #[test]
    fn filled_without_contract_fails() {
        let c = PiContainer::builder("X", ContainerClass::standard(), "A")
            .contents(product(1, 1.0, 1.0))
            .consignor("A")
            .consignee("C")
            .build()
            .unwrap();
        let r = validate_container(&c);
        assert!(r.has(reason::MISSING_CONTRACT));
    }

    #[test]
    fn filled_with_matching_contract_passes() {
        let p = product(2, 1.0, 1.0);
        let c = PiContainer::builder("X", ContainerClass::standard(), "A")
            .contract(contract_for(&p))
            .contents(p)
            .consignor("A")
            .consignee("C")
            .build()
            .unwrap();
        assert!(validate_container(&c).passed(), "{}", validate_container(&c));
    }

    #[test]
    fn two_consignees_rejected_at_construction() {
        let err = PiContainer::builder("X", ContainerClass::standard(), "A")
            .consignee("B")
            .consignee("C")
            .build()
            .unwrap_err();
        assert!(matches!(err, DomainError::MulticastConsignee(ref v) if v.len() == 2));
    }

    #[test]
    fn contract_payments_bounded_by_total() {
        let p = product(1, 1.0, 1.0);
        let mut k = contract_for(&p);
        k.intermediate_payments = vec![MilestonePayment { milestone: Milestone::Departed, amount: 150.0 }];
        assert!(k.validate().is_err());
    }

    #[test]
    fn gross_weight_adds_tare() {
        let p = product(10, 500.0, 1.0);
        let c = PiContainer::builder("X", ContainerClass::standard(), "A").contents(p).build().unwrap();
        assert_eq!(c.gross_weight(), 2_200.0 + 5_000.0);
    }
}
