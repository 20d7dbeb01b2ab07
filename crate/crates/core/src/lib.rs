//! Numerical laboratory for the isentropic compressible Euler equations with
//! time-decaying friction `μ/(1+t)^λ · ρu`.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerics:
//!
//! * [`params`]: damping, gas and weight parameters, the weight function and its
//!   derivative identities, the integrating factor and the frequency zones.
//! * [`linear`]: per-frequency propagators of the damped wave equation, the
//!   Fourier representation of its solution, zone envelopes and kernel decay.
//! * [`euler`]: the symmetrized nonlinear system on a periodic box, advanced with
//!   a dealiased pseudo-spectral discretization and classical RK4.
//! * [`diagnostics`]: weighted energies, Sobolev norms, mass and moment
//!   functionals, decay fits and lower-bound margins.
//!
//! IO, configuration and the command-line front end live in the `tdeuler-lab`
//! crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is the NaN-rejecting form used by every parameter check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod diagnostics;
pub mod error;
pub mod euler;
pub mod exec;
pub mod fft;
pub mod grid;
pub mod linear;
pub mod math;
pub mod ode;
pub mod params;
pub mod quad;

pub use error::{Error, Result};
pub use num_complex::Complex64;
