//! Delay-embedding machinery and the two reference forecasters: analog
//! (nearest-neighbor) forecasting and sparse second-order polynomial
//! regression.

mod analog;
mod embed;
mod fnn;
mod lag;
mod sparse;

pub use analog::{analog_forecast, AnalogCatalog, AnalogRegression};
pub use embed::{delay_embed, DelayEmbedding};
pub use fnn::{embedding_dim_fnn, fnn_curve};
pub use lag::{lag_by_autocorrelation, lag_by_mutual_information, LagEstimate};
pub use sparse::{
    monomial_descriptors, sparse_fit, sparse_forecast, sparse_model_to_table, SparseModel,
};
