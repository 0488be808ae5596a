//! Messages exchanged between layers. Each one travels as a kernel event
//! and leaves a `pdu` record in the trace.

use crate::domain::ClassId;
use crate::ids::{BlockId, ContainerId, DemandId, LoadId, MeanId, Minutes, NodeId, OrderId, ShipmentId};
use crate::kernel::Fault;
use crate::layers::container::ContainerSet;
use crate::layers::link::MeanFaultKind;
use crate::layers::order::OrderKind;

/// Why empties are wanted.
#[derive(Debug, Clone, PartialEq)]
pub enum Purpose {
    Demand(DemandId),
    /// Replacement goods for a lost or rejected container.
    Refill { demand: DemandId, lost: ContainerId },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecoveryStep {
    Resend { spare: ContainerId },
    Reorder { demand: DemandId, delay: Minutes },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Msg {
    // kernel
    Bootstrap,
    Release { demands: Vec<DemandId> },
    Reposition { class: ClassId, to: NodeId, count: u32 },
    RepositionTick,
    InjectFault(Fault),
    Recheck { block: BlockId },
    TopologyChanged,

    // descent
    EmptyRequest { purpose: Purpose, class: ClassId, count: u32 },
    EmptyGrant { purpose: Purpose, containers: Vec<ContainerId> },
    Filled { containers: Vec<ContainerId>, spares: Vec<ContainerId>, recovery_of: Option<ContainerId> },
    Sets { sets: Vec<ContainerSet>, kind: OrderKind, recovery_of: Option<ContainerId> },
    Orders { orders: Vec<OrderId> },
    Loads { loads: Vec<LoadId> },
    BlockHop { block: BlockId },
    Dispatch { shipment: ShipmentId },
    Depart { shipment: ShipmentId },

    // between nodes
    Arrive { shipment: ShipmentId, generation: u64 },
    DeadheadEnd { mean: MeanId, generation: u64 },
    Peer { to_node: NodeId, to_layer: u8, inner: Box<Msg> },

    // ascent
    StepDone { shipment: ShipmentId },
    StowageReject { block: BlockId, containers: Vec<ContainerId> },
    HopStarted { block: BlockId },
    BlockDeparted { block: BlockId },
    OrdersDeparted { orders: Vec<OrderId> },
    HopDone { block: BlockId },
    BlockArrived { block: BlockId },
    Arrived { containers: Vec<ContainerId> },
    Received { containers: Vec<ContainerId> },
    Deliver { containers: Vec<ContainerId> },
    Emptied { containers: Vec<ContainerId> },
    Delivered { containers: Vec<ContainerId> },

    // faults and recovery
    MeanProblem { mean: MeanId, kind: MeanFaultKind },
    Postpone { shipment: ShipmentId, extra_minutes: Minutes },
    Escalate { block: BlockId },
    BlockException { block: BlockId, reason: String },
    DamageSignal { containers: Vec<ContainerId> },
    LossNotice { container: ContainerId },
    LostSignal { containers: Vec<ContainerId> },
    Recover { container: ContainerId },
    RecoverLoss { container: ContainerId },
    RecoveryPlan { lost: ContainerId, step: RecoveryStep },
    ReleaseSpare { lost: ContainerId, spare: ContainerId },
    Refill { lost: ContainerId, demand: DemandId, delay: Minutes },
    RefillDue { lost: ContainerId, demand: DemandId },
    OrphanCheck { containers: Vec<ContainerId> },
    OrphanFound { containers: Vec<ContainerId> },

    // housekeeping
    MeanIdle { mean: MeanId },
    MeanAvailable,
}

impl Msg {
    pub fn name(&self) -> &'static str {
        match self {
            Msg::Bootstrap => "bootstrap",
            Msg::Release { .. } => "release",
            Msg::Reposition { .. } => "reposition",
            Msg::RepositionTick => "reposition_tick",
            Msg::InjectFault(_) => "inject_fault",
            Msg::Recheck { .. } => "recheck",
            Msg::TopologyChanged => "topology_changed",
            Msg::EmptyRequest { .. } => "empty_request",
            Msg::EmptyGrant { .. } => "empty_grant",
            Msg::Filled { .. } => "filled",
            Msg::Sets { .. } => "sets",
            Msg::Orders { .. } => "orders",
            Msg::Loads { .. } => "loads",
            Msg::BlockHop { .. } => "block_hop",
            Msg::Dispatch { .. } => "dispatch",
            Msg::Depart { .. } => "depart",
            Msg::Arrive { .. } => "arrive",
            Msg::DeadheadEnd { .. } => "deadhead_end",
            Msg::Peer { .. } => "peer",
            Msg::StepDone { .. } => "step_done",
            Msg::StowageReject { .. } => "stowage_reject",
            Msg::HopStarted { .. } => "hop_started",
            Msg::BlockDeparted { .. } => "block_departed",
            Msg::OrdersDeparted { .. } => "orders_departed",
            Msg::HopDone { .. } => "hop_done",
            Msg::BlockArrived { .. } => "block_arrived",
            Msg::Arrived { .. } => "arrived",
            Msg::Received { .. } => "received",
            Msg::Deliver { .. } => "deliver",
            Msg::Emptied { .. } => "emptied",
            Msg::Delivered { .. } => "delivered",
            Msg::MeanProblem { .. } => "mean_problem",
            Msg::Postpone { .. } => "postpone",
            Msg::Escalate { .. } => "escalate",
            Msg::BlockException { .. } => "block_exception",
            Msg::DamageSignal { .. } => "damage_signal",
            Msg::LossNotice { .. } => "loss_notice",
            Msg::LostSignal { .. } => "lost_signal",
            Msg::Recover { .. } => "recover",
            Msg::RecoverLoss { .. } => "recover_loss",
            Msg::RecoveryPlan { .. } => "recovery_plan",
            Msg::ReleaseSpare { .. } => "release_spare",
            Msg::Refill { .. } => "refill",
            Msg::RefillDue { .. } => "refill_due",
            Msg::OrphanCheck { .. } => "orphan_check",
            Msg::OrphanFound { .. } => "orphan_found",
            Msg::MeanIdle { .. } => "mean_idle",
            Msg::MeanAvailable => "mean_available",
        }
    }
}
