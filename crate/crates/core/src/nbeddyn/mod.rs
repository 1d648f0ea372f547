//! Augmented latent ODE identification.
//!
//! The observed series `x_t` is augmented with free latent components `y_t`
//! into `X_t = [x_t, y_t]`; a bilinear ODE field over the augmented state
//! is trained jointly with the latent trajectory by minimizing the one-step
//! forecast error plus a flow-consistency coupling term. Forecasting a new
//! sequence infers its latent initial condition with the field frozen, then
//! integrates.

mod infer;
mod model;
mod persist;
mod train;

pub use infer::{
    forecast, infer_initial_condition, nearest_training_init, training_window, ConditioningMode,
    InferConfig, InferenceResult, InitStrategy, NearestInit,
};
pub use model::{BilinearODEModel, ModelArch};
pub use persist::{load_model, model_to_json, model_from_json, save_model, SCHEMA_VERSION};
pub use train::{
    init_latent, init_latent_delay, train, train_with_callback, LatentInit, LatentTrajectory,
    TrainConfig, TrainedModel,
};
