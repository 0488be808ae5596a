//! Layer 7: fills empty containers with goods and empties delivered ones.
//! Containerization and de-containerization happen here and nowhere else.

use thiserror::Error;

use crate::domain::{check_compatibility, Contract, Integrity, Location, MilestonePayment, PiContainer, Product};
use crate::ids::{ContractId, Minutes, Money, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProductError {
    #[error("incompatible: {}", .0.join(","))]
    Incompatible(Vec<String>),
    #[error("container already holds goods")]
    NotEmpty,
    #[error("contract mismatch")]
    ContractMismatch,
    #[error("damaged goods")]
    DamagedGoods,
    #[error("container has no contract")]
    MissingContract,
    #[error("container is not at its consignee node")]
    NotAtConsignee,
}

/// Commercial terms for one container.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractTerms {
    pub contract_id: ContractId,
    pub consignor: NodeId,
    pub consignee: NodeId,
    pub deadline: Minutes,
    pub priority: u8,
    pub payment_total: Money,
    pub intermediate_payments: Vec<MilestonePayment>,
}

pub fn fill_container(
    batch: &Product,
    mut empty: PiContainer,
    terms: ContractTerms,
) -> Result<(PiContainer, Contract), ProductError> {
    if empty.is_filled() {
        return Err(ProductError::NotEmpty);
    }
    let report = check_compatibility(batch, &empty.class);
    if !report.passed() {
        return Err(ProductError::Incompatible(
            report.codes().into_iter().map(str::to_owned).collect(),
        ));
    }
    let contract = Contract {
        contract_id: terms.contract_id,
        consignor: terms.consignor.clone(),
        consignee: terms.consignee.clone(),
        product_code: batch.product_code.clone(),
        quantity: batch.quantity,
        deadline: terms.deadline,
        priority: terms.priority,
        payment_total: terms.payment_total,
        intermediate_payments: terms.intermediate_payments,
    };
    empty.put_contents(batch.clone());
    empty.consignor = Some(terms.consignor);
    empty.consignee = Some(terms.consignee);
    empty.contract = Some(contract.clone());
    Ok((empty, contract))
}

/// Releases the goods when the contract matches and the container is intact.
/// On failure the container is handed back unchanged (held).
#[allow(clippy::result_large_err)]
pub fn empty_container(
    mut filled: PiContainer,
    expected: &Contract,
) -> Result<(Product, PiContainer), (ProductError, PiContainer)> {
    let Some(contract) = filled.contract.as_ref() else {
        return Err((ProductError::MissingContract, filled));
    };
    if filled.location != Location::Node(contract.consignee.clone()) {
        return Err((ProductError::NotAtConsignee, filled));
    }
    let matches = contract.contract_id == expected.contract_id
        && contract.product_code == expected.product_code
        && contract.quantity == expected.quantity;
    if !matches {
        return Err((ProductError::ContractMismatch, filled));
    }
    if filled.integrity == Integrity::Damaged {
        return Err((ProductError::DamagedGoods, filled));
    }
    let product = filled.take_contents().expect("contract present implies contents");
    filled.contract = None;
    filled.consignor = None;
    filled.consignee = None;
    Ok((product, filled))
}
