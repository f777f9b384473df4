//! Throughput models for a single TCP Compound flow under random packet loss.
//!
//! Three routes to the time-average window are provided:
//!
//! * [`fluid`]: the deterministic-loss fluid model (a drop every `1/p` packets),
//! * [`stochastic`]: the per-RTT window chain at a fixed loss rate, simulated
//!   or solved on a truncated integer state space,
//! * [`limit`]: the scaled loss-epoch chain obtained as `p -> 0`, whose
//!   stationary mean inter-loss time gives a closed-form `p^{-1/(2-k)}` law.
//!
//! [`harness`] wires these into table and figure reproductions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compound;
pub mod error;
pub mod fluid;
pub mod harness;
pub mod limit;
pub mod rng;
pub mod stats;
pub mod stochastic;

pub use compound::{CompoundParams, CompoundState, LossRate};
pub use error::{Error, Result};
