//! Reaction-diffusion on algebraic curves and surfaces with isolated singularities.
//!
//! The singular variety is replaced by a smooth blow-up in a higher-dimensional
//! space, the PDE is pulled back to a variable-coefficient problem on a fixed
//! smooth variety, and that problem is solved with the closest point method on a
//! banded Cartesian grid. A truncated Fourier series in arclength serves as the
//! reference solution for curves.

pub mod error;
pub mod poly;
pub mod varieties;

pub use error::{Error, Result};
pub use poly::Polynomial;
pub use varieties::{
    catalogue, CurveParam, DeformationMatrix, ImplicitSystem, Parametrization, PointClass,
    VarietyEntry,
};
pub mod ic;
pub mod quadrature;
pub mod spectral;
pub mod closest_point;
pub mod sparse;
pub mod grid;
pub mod linsolve;
pub mod cpm;
pub mod surface5d;
