//! Numerical toolkit for gradient generalized Ricci solitons on flat tori.
//!
//! The crate covers discrete tensor calculus on periodic grids, the
//! string/Einstein frame change, residual evaluators for the soliton
//! system, the reduced Cauchy evolution with its constraints, the 2D
//! initial-data solver, and flux-level gerbe bookkeeping.

pub mod cauchy;
pub mod constraint2d;
pub mod error;
pub mod frames;
pub mod field;
pub mod geometry;
pub mod gerbe;
pub mod gfld;
pub mod grid;
pub mod samples;
pub mod soliton;
mod solver;

pub use error::{Error, Result};
pub use field::{Form, Scalar, SymTensor, VectorField};
pub use geometry::Metric;
pub use grid::Grid;
