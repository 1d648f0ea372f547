//! Dataset construction shared by all commands: simulate, observe, add
//! noise, and standardize using training-segment statistics.

use crate::config::ExperimentConfig;
use nbeddyn_core::dynamics::{
    add_observation_noise, observe, simulate_linear_complex, simulate_lorenz63, Lorenz63Params,
    ObservationOperator, TimeSeries,
};
use nbeddyn_core::linalg::{mean, std_dev, Mat};
use nbeddyn_core::{Error, Result};

/// A fully prepared experiment dataset. `observed` is noise-added and (if
/// configured) standardized; `train_len` rows of it form the training
/// segment and the rest is the test segment.
pub struct Dataset {
    /// Full simulated state (3 columns for lorenz63, Re/Im for linear).
    pub truth: TimeSeries,
    pub observed: TimeSeries,
    pub train_len: usize,
    /// Per-column (mean, std) used for standardization, when enabled.
    pub norm: Option<Vec<(f64, f64)>>,
}

impl Dataset {
    pub fn train(&self) -> TimeSeries {
        self.observed.window(0, self.train_len)
    }
}

/// Deterministically build the dataset described by the config.
pub fn build_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let d = &cfg.dataset;
    let total = d.steps + d.transient;
    let (truth_full, op) = match d.system.as_str() {
        "lorenz63" => {
            let z0 = [d.z0[0], d.z0[1], d.z0[2]];
            let ts = simulate_lorenz63(z0, d.dt, total, Lorenz63Params::default(), d.substeps)?;
            (ts, ObservationOperator::ComponentSelection(d.observed.clone()))
        }
        "linear" => {
            let ts = simulate_linear_complex((-0.1, -0.5), (d.z0[0], d.z0[1]), d.dt, total)?;
            (ts, ObservationOperator::RealPartOfComplex)
        }
        other => return Err(Error::invalid(format!("unknown system {other:?}"))),
    };
    // drop transient, keep exactly `steps` samples
    let truth = truth_full.window(d.transient, d.transient + d.steps);
    let truth = TimeSeries::new(truth.values.clone(), truth.dt, 0.0)?;
    let mut observed = observe(&truth, &op)?;
    if d.noise_sigma > 0.0 {
        observed = add_observation_noise(&observed, d.noise_sigma, cfg.seed.wrapping_add(0x5eed))?;
    }
    let norm = if d.normalize {
        let cols = observed.dim();
        let mut stats = Vec::with_capacity(cols);
        let mut values = Mat::zeros(observed.len(), cols);
        for c in 0..cols {
            let col = observed.values.column(c);
            let (m, s) = (mean(&col[..d.train_len]), std_dev(&col[..d.train_len]));
            if s == 0.0 {
                return Err(Error::invalid(format!(
                    "observed column {c} is constant over the training segment"
                )));
            }
            for t in 0..observed.len() {
                values.set(t, c, (col[t] - m) / s);
            }
            stats.push((m, s));
        }
        observed = TimeSeries::new(values, observed.dt, observed.start_time)?;
        Some(stats)
    } else {
        None
    };
    Ok(Dataset {
        truth,
        observed,
        train_len: d.train_len,
        norm,
    })
}
