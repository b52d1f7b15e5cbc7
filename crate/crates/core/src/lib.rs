//! Numerical laboratory for the elliptic quantum group `E(tau, eta)(sl2)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`elliptic_core`]: theta function, elliptic numbers, phase function.
//! * [`weight_functions`]: elliptic weight functions, their mirrors and special points.
//! * [`rmatrix`]: the dynamical R-matrix built from weight functions, Shapovalov form,
//!   pole and coefficient identities.
//! * [`qkzb_ops`]: difference operators acting on vector-valued functions of the
//!   dynamical variable (qKZB operators, transfer matrices, Weyl reflection).
//! * [`fusion`]: exact fusion-rule combinatorics.
//! * [`bethe`]: Bethe ansatz equations, root solver and eigenfunctions.
//! * [`irf`]: Boltzmann weights and interaction-round-a-face transfer matrices.

pub mod bethe;
pub mod elliptic_core;
pub mod error;
pub mod fusion;
pub mod irf;
pub mod linalg;
pub mod qkzb_ops;
pub mod rmatrix;
pub mod sampling;
pub mod weight_functions;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Shorthand used throughout the crate.
pub type C64 = Complex64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;

/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;

/// `x + iy`.
#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
