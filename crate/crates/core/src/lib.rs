//! Pseudo-spectral incompressible Navier–Stokes laboratory on the periodic
//! cube.
//!
//! * [`field`]: periodic fields with physical and spectral representations,
//!   differential operators, norms, interpolation and synthetic generators.
//! * [`solver`]: Leray-projected integration of the unforced equations with
//!   an integrating-factor RK4 scheme.
//! * [`pressure`]: the global pressure and its local decomposition
//!   `p = β + π`, evaluated by nested sphere × radial quadrature.
//! * [`structure`]: second order structure functions, longitudinal increment
//!   moments, scaling-exponent fits and increment moduli.
//! * [`criteria`]: enstrophy certificates and uniform-integrability monitors
//!   evaluated along a trajectory.
//!
//! Every reduction over grid points goes through [`sum`], which fixes the
//! summation tree so that results do not depend on the rayon pool size.

pub mod criteria;
pub mod csv;
pub mod error;
pub mod fft;
pub mod field;
pub mod pressure;
pub mod quadrature;
pub mod snapshot;
pub mod solver;
pub mod structure;
pub mod sum;

pub use error::{Error, Result};
pub use field::{Field, GridSpec, ScalarField};
