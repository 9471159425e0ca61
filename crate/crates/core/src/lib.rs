//! Gradient discretisations of elliptic optimal control problems with
//! box-constrained controls: meshes, three schemes (conforming P1,
//! Crouzeix–Raviart, HMM), sparse assembly, a primal-dual active-set KKT
//! solver, post-processed controls and convergence studies.

pub mod analysis;
pub mod assembly;
pub mod cases;
pub mod control;
mod dense;
pub mod error;
pub mod gd;
pub mod mesh;
pub mod quadrature;
pub mod schemes;
pub mod study;

pub use error::{Error, Result};
