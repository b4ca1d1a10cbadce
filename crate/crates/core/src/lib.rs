//! Hahn quantum calculus and quantum variational problems with free end-points.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exec;
pub mod expr;
pub mod hahn;
pub mod integral;
pub mod models;
pub mod varcalc;

pub use error::{Error, Result};
pub use hahn::{build_lattice, GridFunction, HahnParams, Lattice, Orbit, Side};
pub use integral::{QuadratureMode, QuadratureSpec};
