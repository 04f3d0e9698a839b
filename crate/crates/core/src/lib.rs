//! Numerical laboratory for the anisotropic higher-order Alt–Caffarelli problem.
//!
//! The crate assembles the divergence-form operator `L = -div(A∇)` on masked
//! uniform grids, computes discrete Green's functions of `L` (Dirichlet) and
//! `L²` (Navier), dissects their logarithmic singularities, minimizes the
//! bending-plus-measure energy
//!
//! ```text
//! E(u) = ∫ (div A∇u)² dx + |{u > 0}|,   u = u₀ on ∂Ω,
//! ```
//!
//! and post-processes minimizers: nodal set extraction, Euler–Lagrange and
//! domain-variation identities, mollified interface measures.
//!
//! Modules, bottom-up: [`anisotropy`], [`linsolve`], [`grid`], [`greens`],
//! [`minimizer`], [`nodal`].

pub mod anisotropy;
pub mod diff;
pub mod error;
pub mod greens;
pub mod grid;
pub mod linsolve;
pub mod minimizer;
pub mod nodal;

pub use anisotropy::{CoefficientField, Point};
pub use error::{Error, Result};
pub use grid::{DiscreteDomain, ScalarField, Shape, SparseOperator};
