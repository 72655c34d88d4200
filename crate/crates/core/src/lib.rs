//! Approximate valuation of European and American basket put options by a
//! handful of one- and two-dimensional PDE/PDCP solves.
//!
//! Two dimension reductions are provided:
//!
//! * the principal-component approach, which expands the value in the
//!   non-leading eigenvalues of the covariance matrix and needs one 1D and
//!   `d - 1` 2D problems ([`engines::pca_price`]);
//! * the comonotonic approach, a weighted mix of two rank-one (1D) problems
//!   ([`engines::comonotonic_price`]).
//!
//! Both are discretised with three-point finite differences on a smooth
//! nonuniform grid in the arctan-transformed coordinates, cell averaging of
//! the payoff, and Douglas ADI / Crank–Nicolson time stepping with a damped
//! start. American problems use explicit-payoff or Ikonen–Toivanen
//! complementarity updates.

// Index loops read closer to the matrix algebra; negated comparisons reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod engines;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod model;
pub mod oracles;
pub mod presets;
pub mod spectral;
pub mod stepper;
pub mod transform;
pub mod tridiag;

pub use engines::{comonotonic_price, comonotonic_weights, pca_price, ComonotonicPrice, ComonotonicWeights, PcaPrice};
pub use error::{Error, Result};
pub use model::{BasketSpec, ExerciseStyle};
pub use spectral::{eigendecompose, ColumnClass, Spectrum};
pub use stepper::ConstraintMode;
