//! Numerical laboratory for semilinear wave equations on product Lorentzian
//! metrics.
//!
//! The crate builds, end to end, the machinery needed to recover a zeroth
//! order potential `q` in `box_g u + q u^m = 0` from boundary measurements:
//!
//! * [`metric`] / [`geometry`] — product metrics `-beta dt^2 + h`, geodesic
//!   tracing, pseudo-orthonormal frames, tube charts, boundary optimal
//!   geodesics and path intersections;
//! * [`solver`] — explicit finite-difference solution of the linear and
//!   semilinear wave equations with lateral Dirichlet data, the numerical
//!   boundary-to-flux map and discrete energy norms;
//! * [`beam`] — Gaussian beam quasimodes: phase jets from a matrix Riccati
//!   flow, transport amplitudes, residual certification and correction to
//!   exact discrete solutions;
//! * [`linearize`] — mixed finite differences of the nonlinear
//!   boundary-to-flux map over `2^m` solves and the resulting integral
//!   identity;
//! * [`recon`] — pointwise recovery of the potential, separation matrices
//!   and filters for multiple geodesic intersections, parameter selection
//!   and empirical stability sweeps.
//!
//! Independent solves run data-parallel through [`par::run_batch`] when the
//! `parallel` feature (default) is enabled; disabling it yields a fully
//! sequential build with identical outputs.

pub mod beam;
pub mod config;
pub mod csvio;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod linearize;
pub mod metric;
pub mod par;
pub mod recon;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
