//! Pseudospectral simulator and verification harness for the nonlocal
//! Cahn-Hilliard equation with logarithmic potential on the periodic torus.
//!
//! ```text
//! ∂φ/∂t = Δμ,   μ = F'(φ) − J∗φ
//! ```
//!
//! The crate is organized bottom-up: [`grid`] (fields and norms),
//! [`kernel`] (interaction kernels and convolution), [`potential`]
//! (logarithmic potential), [`dynamics`] (energy-stable time stepping),
//! [`diagnostics`] (energies, separation, Poincaré and Gagliardo-Nirenberg
//! ratios), [`degiorgi`] (level-truncation constants and measurements),
//! [`equilibrium`] (stationary states), and [`io`] (config, snapshots, CSV).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod degiorgi;
pub mod diagnostics;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod grid;
pub mod io;
pub mod kernel;
pub mod potential;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::{Field, Grid};
pub use kernel::{Kernel, KernelFamily, KernelParams};
pub use potential::PotentialParams;
