//! Library for simulating fully nonlinear, weakly dispersive free-surface
//! waves with an arbitrary-order nodal discontinuous Galerkin method on
//! unstructured triangular meshes.
//!
//! The hyperbolic engine solves the pre-balanced nonlinear shallow water
//! equations; non-hydrostatic effects enter through an algebraic dispersive
//! correction obtained from scalar second-order elliptic solves (assembled
//! and factorized once per bathymetry).

pub mod basis;
pub mod boundary;
pub mod dense;
pub mod dispersive;
pub mod driver;
pub mod elliptic;
pub mod error;
pub mod field;
pub mod limiters;
pub mod mesh;
pub mod sparse;
pub mod quad;
pub mod swe;
pub mod timestepping;

pub use error::Error;
