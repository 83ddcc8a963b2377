//! Energy-preserving Runge-Kutta methods for polynomial Hamiltonian systems.
//!
//! The averaged vector field (AVF) method discretized by an `s`-stage
//! quadrature rule is the Runge-Kutta method `A = c b^T`. This crate builds
//! those tableaux and checks, exactly or in high precision, the conditions
//! that make them the only energy-preserving choice:
//!
//! - [`hamiltonian`]: exact polynomial Hamiltonians and the line-averaged field,
//! - [`quadrature`]: Legendre families, rules on zeros of `P_s - ζ P_{s-1}`,
//!   discrete inner products,
//! - [`trees`]: rooted/free trees and B-series energy conditions,
//! - [`conditions`]: the double-bush operator `M`, its kernel, and the
//!   nonlinear bush residuals,
//! - [`integrators`]: AVF and Runge-Kutta time stepping in `f64`.

pub mod conditions;
pub mod error;
pub mod hamiltonian;
pub mod integrators;
pub mod linalg;
pub mod quadrature;
pub mod real;
pub mod trees;

pub use error::{Error, Result};
pub use real::Real;
