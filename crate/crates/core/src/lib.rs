//! Continuous sensing of an Ornstein–Uhlenbeck spin bath through the photon
//! stream of a single emitter held near coherent population trapping.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod cpt;
pub mod crlb;
pub mod estimators;
pub mod harness;
pub mod photon;
pub mod quadrature;
pub mod seed;
