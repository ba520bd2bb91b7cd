//! Slope gaps of translation surfaces through horocycle-flow return maps.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod lattice;
pub mod transversal;
pub mod measures;
pub mod oracle;
pub mod closed_form;
