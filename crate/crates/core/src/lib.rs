//! Identification of augmented latent ODE models for partially observed
//! dynamical systems.
//!
//! The library covers the full experimental pipeline:
//!
//! * [`num_core`] — deterministic numerical kernels: RK4 flow maps,
//!   reverse-mode gradients of the training losses, analytic Jacobians,
//!   Adam, and finite-difference verification utilities.
//! * [`dynamics`] — ground-truth simulators (Lorenz-63, linear complex ODE),
//!   observation operators, PCA preprocessing, and observation noise.
//! * [`nbeddyn`] — the augmented latent state model: a bilinear ODE field
//!   over `[x_t, y_t]`, joint training of parameters and latent states, and
//!   forecasting of new sequences via variational initial-condition
//!   inference.
//! * [`baselines`] — delay-embedding machinery (lag and dimension
//!   estimators) plus analog forecasting and sparse polynomial regression.
//! * [`eval`] — horizon RMSE/correlation reports, largest Lyapunov exponent
//!   (Rosenstein), and Jacobian eigenvalue spectrum analysis.
//! * [`io`] — the shared CSV time-series format.
//!
//! All arithmetic is 64-bit. Every operation is deterministic per seed; the
//! optional `parallel` feature (on by default) parallelizes the per-timestep
//! loss terms with rayon using a fixed chunked reduction order, so parallel
//! and sequential builds produce bit-identical results.

pub mod baselines;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod io;
pub mod linalg;
pub mod nbeddyn;
pub mod num_core;

pub(crate) mod parallel;

pub use error::{Error, Result};
pub use linalg::Mat;
