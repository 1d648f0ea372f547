//! Deterministic numerical kernels: RK4 integration of parametric vector
//! fields, reverse-mode gradients of the training losses, analytic
//! Jacobians, Adam, and finite-difference verification utilities.

mod adam;
mod field;
pub mod fd;
mod loss;
mod rk4;

pub use adam::{adam_minimize, AdamConfig, AdamRun, AdamState, StepDecay, DIVERGENCE_LIMIT};
pub use field::{jacobian_at, LinearField, VectorField, ZeroField};
pub use loss::{
    loss_and_gradients, loss_and_gradients_full, loss_and_gradients_full_sequential,
    FullGradients, GradientResult, LossOptions,
};
pub use rk4::{flow_trajectory, rk4_step, IntegratorConfig};

pub(crate) use rk4::{rk4_backward, rk4_forward_tape, Rk4Workspace};
