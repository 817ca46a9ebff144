//! Numerical laboratory for the transverse instability of solitary waves under the
//! KP-I equation and the cubic nonlinear Schrödinger equation.
//!
//! The crate builds explicit unstable eigenmodes, high-order approximate solutions
//! seeded by them, evolves the full nonlinear equations pseudospectrally, and measures
//! how long a perturbation of size `δ` takes to leave a neighbourhood of the soliton
//! orbit.

pub mod error;
pub mod evolution;
pub mod expansion;
pub mod fft;
pub mod fit;
pub mod grid;
pub mod kp_spectrum;
pub mod lab;
pub mod nls_spectrum;
pub mod orbit;
pub mod solitons;
pub mod verify;

pub use error::{Error, Result};
pub use evolution::Equation;
pub use num_complex::Complex64;
