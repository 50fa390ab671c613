//! Configuration, logging and stage drivers behind the `retarget` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod logging;
pub mod stages;
