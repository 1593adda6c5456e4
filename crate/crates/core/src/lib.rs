#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carleman;
pub mod error;
pub mod evolution;
pub mod fourier_stack;
pub mod harness;
pub mod linalg;
pub mod lr_machinery;
pub mod mode_operator;
pub mod observability;
pub mod quasimode;
pub mod stability;
