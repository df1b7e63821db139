//! Simulation and analysis of coherent-state quantum key distribution on
//! superconducting rings (dc-SQUIDs) whose stored states undergo Kerr
//! collapse and revival.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod device;
pub mod fock;
pub mod keyrate;
pub mod numerics;
pub mod protocol;
pub mod report;
