//! Viscous approximation of rate-independent systems with two time scales,
//! the vanishing-viscosity limit and its BV characterisation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bv_analysis;
pub mod contact;
pub mod energy;
pub mod numeric;
pub mod par;
pub mod pipeline;
pub mod potentials;
pub mod probes;
pub mod rescale;
pub mod viscous_solver;
