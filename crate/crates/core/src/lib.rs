//! Bivariate Bernstein-Bezier spline solver for exterior Helmholtz
//! scattering, truncated by a Cartesian perfectly matched layer.

pub mod analytic;
pub mod assembly;
pub mod bernstein;
pub mod cli;
pub mod error;
pub mod evaluation;
pub mod mesh;
pub mod pml;
pub mod sparse;
pub mod spline_space;

pub use error::{Error, Result};
