//! Nonlinear finite elements for solid and liquid membranes.
//!
//! Surfaces are described in curvilinear coordinates on the master square.
//! Elements use Lagrange or Bézier-extracted (NURBS, T-spline) bases, and the
//! solver handles pressure, enclosed-volume constraints, hydrostatic loading
//! and penalty contact with rigid obstacles.

#![allow(clippy::needless_range_loop)]

pub mod analytic;
pub mod assembly;
pub mod constitutive;
pub mod error;
pub mod geometry;
pub mod master_element;
pub mod mesh;
pub mod postprocess;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
