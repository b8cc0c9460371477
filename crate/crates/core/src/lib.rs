//! Couplings on the intersection graph of a cover.
//!
//! A *coupling* assigns a scalar `d[U][V]` to every ordered pair of
//! intersecting cover sets. A *primitive* is an assignment `C[U]` with
//! `d[U][V] = C[V] - C[U]` on every intersecting pair. This crate decides
//! whether a primitive exists, builds one from spanning-tree chain sums when
//! it does, and reports the signed cycle sums (holonomy) that obstruct it
//! when it does not.
//!
//! The same machinery drives two gluing pipelines on masked 2D grids:
//! merging sampled functions that agree up to constants on overlaps, and
//! reconstructing a potential from a curl-free vector field via local
//! rectangle potentials.
//!
//! Module map:
//!
//! - [`nerve`]: covers, nerve graphs, spanning forests and fundamental cycles.
//! - [`cocycle`]: couplings and the antisymmetry / triple additivity checks.
//! - [`solver`]: primitive construction and holonomy reports.
//! - [`path_chain`]: planar chart covers, chains of charts along polylines.
//! - [`gluing`]: grid fields, local potentials and the two gluing pipelines.
//! - [`io`]: JSON and CSV file formats.

// `!(x <= tol)` is used on purpose so that NaN counts as a violation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cocycle;
pub mod error;
pub mod gluing;
pub mod io;
pub mod nerve;
pub mod numfmt;
pub mod path_chain;
pub mod solver;

pub use cocycle::{induced_coupling, primitive_residual, validate_compatibility, Coupling, ViolationReport};
pub use error::{Error, Result};
pub use nerve::{build_nerve, cycle_basis, Cover, CycleBasis, NerveGraph};
pub use solver::{component_primitives, holonomy, solve_primitive, HolonomyReport, Primitive};

/// Default absolute tolerance for compatibility checks and obstruction tests.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
