//! Evaluation utilities: forecast scoring, largest-Lyapunov-exponent
//! estimation, and Jacobian eigenvalue spectra.

mod forecast;
mod lyapunov;
mod spectrum;

pub use forecast::{forecast_rmse, ForecastReport};
pub use lyapunov::{
    fit_divergence_slope, largest_lyapunov, mean_period, LyapunovConfig, LyapunovEstimate,
};
pub use spectrum::{jacobian_spectrum, spectrum_over, SpectrumReport};
