//! Numerical core for a configuration-space U(1) gauge theory coupled to a
//! log-entropy nonlinear functional Schrödinger equation.
//!
//! Space is a small periodic lattice of `N_x` sites. Each site carries one
//! field axis sampled on `N_φ` points, so a wave functional is a complex
//! array over the `N_φ^N_x` configuration points. Gauge potentials
//! conjugate to the field axes live on the links between neighbouring
//! configuration points, which keeps the discrete Gauss law and the
//! continuity equation exact at the semi-discrete level.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod config_space;
pub mod dynamics;
mod error;
pub mod gauss_poisson;
pub mod hamiltonian;
pub mod linalg;
mod math;
pub mod state;
pub mod stationary;

pub use config_space::Grid;
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use state::{GaugeState, ModelParams, WaveFunctional};
