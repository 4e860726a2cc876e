//! stablewalk: a numerical laboratory for Euler-Maruyama schemes driven by
//! isotropic alpha-stable noise (alpha in (1, 2]) with irregular drift.
//!
//! The crate has three layers:
//!
//! * sampling and kernels: exact increment sampling through Gaussian
//!   subordination, spectral heat-kernel fields on periodic grids, and
//!   pointwise kernel-bound checks (`noise`, `grid`);
//! * dynamics: drift models of Lebesgue, Hoelder and negative-regularity
//!   Besov type with their cutoff and mollification operators (`drift`),
//!   path simulation with counter-based noise streams (`scheme`), and
//!   deterministic density solvers for both the equation and the scheme
//!   (`duhamel`);
//! * analysis: thermic Besov norms, functional-inequality margin checks and
//!   a constructive singular-kernel Gronwall constant (`besov`), weak-error
//!   measurement and convergence-rate regression (`rates`), and runnable
//!   experiment configurations with manifests (`experiments`).
//!
//! Each major capability has a runnable demo under `examples/`; run them as
//!
//! ```text
//! cargo run --release -p stablewalk --example heat_kernel
//! cargo run --release -p stablewalk --example weak_error_rates
//! ```
//!
//! and see the README for the experiment CLI.

pub mod besov;
pub mod drift;
pub mod duhamel;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod noise;
pub mod numeric;
pub mod rates;
pub mod rng;
pub mod scheme;

pub use error::{Error, Result};
