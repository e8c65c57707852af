//! Numerical toolkit for the instability of spherical patches in the
//! Transport-Stokes sedimentation model.
//!
//! The crate is organised bottom-up:
//!
//! - [`quadrature`]: composite Simpson rules on `[0, π]` and `[0, π] × [0, 2π]`,
//!   plus the Legendre basis used by the Galerkin solver.
//! - [`kernels`]: Oseen tensor, Stokes drag, the Hadamard–Rybczynski field and
//!   the chord-distance kernels on the unit sphere.
//! - [`patch_waves`]: exact traveling-wave patches and their L¹ / W₁
//!   instability certificates.
//! - [`surface_evolution`]: the nonlocal hyperbolic model for an axisymmetric
//!   droplet surface `r(t, θ)` with an explicit upwind stepper.
//! - [`linear_stability`]: the linearised operator `L = J + K`, its
//!   characteristic flow, Galerkin spectrum and instability certificates.
//! - [`micro_sim`]: N point particles interacting through the Oseen tensor.
//!
//! Inner loops (quadrature rows, Galerkin entries, pairwise forces) run on
//! rayon when the `parallel` feature is enabled. Every entry point accepts an
//! [`Execution`] so the sequential path stays available for comparison.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod io;
pub mod kernels;
pub mod linear_stability;
pub mod micro_sim;
pub mod patch_waves;
pub mod quadrature;
pub mod surface_evolution;

pub use error::{Error, Result};
pub use exec::Execution;
pub use kernels::{FluidParams, Mat3, Vec3};
