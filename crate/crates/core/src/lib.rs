#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::large_enum_variant
)]

pub mod analytics;
pub mod bloch;
pub mod cli;
pub mod eig;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod greens;
pub mod oracle;
pub mod sweeps;
