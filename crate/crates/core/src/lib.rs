//! Deterministic discrete-event simulator of a Physical Internet whose nodes
//! each run a seven-layer logistics protocol stack.

// Range checks are written `!(x >= 0.0)` so that NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod ids;
pub mod kernel;
pub mod report;
pub mod routing;
pub mod scenario;
pub mod sim;
pub mod layers;
pub mod trace_io;
pub mod metrics;
pub mod audit;
