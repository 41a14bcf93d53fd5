//! Certified global solver for the static economic load dispatch problem with
//! valve-point effects.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod cli;
pub mod envelope;
pub mod error;
pub mod model;
pub mod oracle;
pub mod solver;
pub mod surrogate;

pub use error::{EldpError, Result};
