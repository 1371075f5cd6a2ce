//! Numerical toolkit for the Helmholtz equation across a thin, periodically
//! structured, high-contrast shielding layer.
//!
//! The crate solves the layer-resolved problem, its regularized variant and
//! the interface limit problem with complex-valued Q1 finite elements on
//! structured meshes, provides the periodic unfolding operator and the strip
//! cell problem for the interface corrector, evaluates the explicit
//! coercivity and ellipticity constants, and drives convergence-rate and
//! shielding studies from declarative configs (see the `cage-homog` binary).

pub mod cell;
pub mod constants;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod harness;
pub mod problems;
pub mod unfolding;
pub mod vtk;

pub use error::{CageError, Result};
