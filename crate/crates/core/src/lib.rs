//! Resolvent approximations for −div a(x, x/ε)∇ on the torus: cell problems, effective matrix,
//! flux potentials, smoothed correctors and the ε-sweeps that measure their accuracy.

pub mod cell;
pub mod coeff;
pub mod config;
pub mod error;
pub mod fft;
pub mod fine;
pub mod grid;
pub mod harness;
pub mod homogenize;
pub mod interp;
pub mod krylov;
pub mod linop;
pub mod mat2;
pub mod norm;
pub mod operators;
pub mod smoothing;
pub mod stencil;

pub use error::{Error, Result};
