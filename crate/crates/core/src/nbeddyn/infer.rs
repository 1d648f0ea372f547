//! Variational initial-condition inference and forecasting with a trained
//! model.

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};
use crate::linalg::{dist2, Mat};
use crate::nbeddyn::{TrainedModel, LatentTrajectory};
use crate::num_core::{
    flow_trajectory, loss_and_gradients_full, AdamConfig, AdamState, LossOptions,
    DIVERGENCE_LIMIT,
};
use crate::nbeddyn::train::init_latent;
use serde::{Deserialize, Serialize};

/// How to initialize the latent variables of a new window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitStrategy {
    Random { scale: f64 },
    /// Latents of the most similar training sub-window (L2 on observables).
    NearestTraining,
}

/// Which summation range the inference objective covers, and therefore
/// which end of the window the returned state sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditioningMode {
    /// Fit the window of past observations; return the state at its end.
    Past,
    /// Treat the window as future observations of an unknown initial
    /// condition; return the state at its start.
    Future,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferConfig {
    pub init: InitStrategy,
    pub mode: ConditioningMode,
    pub adam: AdamConfig,
    /// Coupling weight; defaults to the training lambda when `None`.
    pub lambda: Option<f64>,
    pub seed: u64,
}

impl Default for InferConfig {
    fn default() -> Self {
        InferConfig {
            init: InitStrategy::NearestTraining,
            mode: ConditioningMode::Past,
            adam: AdamConfig {
                step: 1e-2,
                iterations: 500,
                ..Default::default()
            },
            lambda: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NearestInit {
    pub offset: usize,
    pub latents: Mat,
    pub distance2: f64,
}

/// Latents of the training sub-window closest (L2) to `new_obs`;
/// ties broken by the smallest offset.
pub fn nearest_training_init(trained: &TrainedModel, new_obs: &TimeSeries) -> Result<NearestInit> {
    let train_x = &trained.train_latents.x;
    let w = new_obs.len();
    if new_obs.dim() != train_x.cols() {
        return Err(Error::DimensionMismatch {
            context: "nearest_training_init observed dimension",
            expected: train_x.cols(),
            got: new_obs.dim(),
        });
    }
    if w > train_x.rows() {
        return Err(Error::SeriesTooShort {
            needed: w,
            have: train_x.rows(),
        });
    }
    let mut best_offset = 0;
    let mut best_d2 = f64::INFINITY;
    for offset in 0..=(train_x.rows() - w) {
        let mut d2 = 0.0;
        for t in 0..w {
            d2 += dist2(train_x.row(offset + t), new_obs.values.row(t));
            if d2 >= best_d2 {
                break;
            }
        }
        // strict inequality keeps the earliest offset on ties
        if d2 < best_d2 {
            best_d2 = d2;
            best_offset = offset;
        }
    }
    Ok(NearestInit {
        offset: best_offset,
        latents: trained
            .train_latents
            .y
            .slice_rows(best_offset, best_offset + w),
        distance2: best_d2,
    })
}

#[derive(Debug, Clone)]
pub struct InferenceResult {
    /// Augmented state at the conditioning point (window end in `Past`
    /// mode, window start in `Future` mode).
    pub state: Vec<f64>,
    /// Inferred latent rows over the window.
    pub latents: Mat,
    /// Observed rows actually used, with masked entries replaced by their
    /// inferred values.
    pub observed: Mat,
    pub final_loss: f64,
    pub initial_loss: f64,
}

/// Infer the unobserved component of the augmented state for a new
/// observation window, with the trained field frozen.
///
/// `mask`, when given, is row-major `len × n`; `false` entries are missing
/// observations. Missing entries are excluded from the data term and
/// treated as free variables alongside the latents.
pub fn infer_initial_condition(
    trained: &TrainedModel,
    new_obs: &TimeSeries,
    mask: Option<&[bool]>,
    cfg: &InferConfig,
) -> Result<InferenceResult> {
    let n = trained.model.n_obs();
    let l = trained.model.latent_dim();
    let w = new_obs.len();
    if new_obs.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "inference observed dimension",
            expected: n,
            got: new_obs.dim(),
        });
    }
    if w < 2 {
        return Err(Error::SeriesTooShort { needed: 2, have: w });
    }
    if let Some(m) = mask {
        if m.len() != w * n {
            return Err(Error::DimensionMismatch {
                context: "observation mask",
                expected: w * n,
                got: m.len(),
            });
        }
        if m.iter().all(|&ob| !ob) {
            return Err(Error::invalid("observation mask removes all data"));
        }
    }
    let lambda = cfg.lambda.unwrap_or(trained.config.lambda);

    // initial latents
    let mut y = match cfg.init {
        InitStrategy::Random { scale } => init_latent(w, l, scale, cfg.seed),
        InitStrategy::NearestTraining => {
            // nearest match is computed on observed entries only
            nearest_training_init(trained, new_obs)?.latents
        }
    };
    let mut x = new_obs.values.clone();
    // free masked observations start from the nearest training window (or
    // the mean of the present entries)
    let masked_indices: Vec<usize> = mask
        .map(|m| (0..w * n).filter(|&i| !m[i]).collect())
        .unwrap_or_default();
    if !masked_indices.is_empty() {
        let fill = match cfg.init {
            InitStrategy::NearestTraining => {
                let near = nearest_training_init(trained, new_obs)?;
                Some(
                    trained
                        .train_latents
                        .x
                        .slice_rows(near.offset, near.offset + w),
                )
            }
            InitStrategy::Random { .. } => None,
        };
        let mean_present = {
            let m = mask.unwrap();
            let mut s = 0.0;
            let mut c = 0usize;
            for (i, v) in x.data().iter().enumerate() {
                if m[i] {
                    s += v;
                    c += 1;
                }
            }
            s / c.max(1) as f64
        };
        for &i in &masked_indices {
            x.data_mut()[i] = fill
                .as_ref()
                .map(|f| f.data()[i])
                .unwrap_or(mean_present);
        }
    }

    // optimization vector: all latent entries then the masked x entries
    let y_len = w * l;
    let mut point: Vec<f64> = Vec::with_capacity(y_len + masked_indices.len());
    point.extend_from_slice(y.data());
    point.extend(masked_indices.iter().map(|&i| x.data()[i]));

    let opts = LossOptions { lambda, mask };
    let mut state = AdamState::new(point.len());
    let mut best_point = point.clone();
    let mut best_loss = f64::INFINITY;
    let mut initial_loss = f64::NAN;
    for it in 0..cfg.adam.iterations {
        y.data_mut().copy_from_slice(&point[..y_len]);
        for (slot, &i) in masked_indices.iter().enumerate() {
            x.data_mut()[i] = point[y_len + slot];
        }
        let g = loss_and_gradients_full(&trained.model, &x, &y, &opts, &trained.config.integrator)
            .map_err(|_| Error::OptimizationDiverged { iteration: it })?;
        if !g.loss.is_finite() || g.loss > DIVERGENCE_LIMIT {
            return Err(Error::OptimizationDiverged { iteration: it });
        }
        if it == 0 {
            initial_loss = g.loss;
        }
        if g.loss < best_loss {
            best_loss = g.loss;
            best_point.copy_from_slice(&point);
        }
        let mut grad = Vec::with_capacity(point.len());
        grad.extend_from_slice(g.grad_latent.data());
        grad.extend(masked_indices.iter().map(|&i| g.grad_obs.data()[i]));
        state.step(&mut point, &grad, &cfg.adam, None);
    }
    y.data_mut().copy_from_slice(&best_point[..y_len]);
    for (slot, &i) in masked_indices.iter().enumerate() {
        x.data_mut()[i] = best_point[y_len + slot];
    }

    let at = match cfg.mode {
        ConditioningMode::Past => w - 1,
        ConditioningMode::Future => 0,
    };
    let mut state_vec = Vec::with_capacity(n + l);
    state_vec.extend_from_slice(x.row(at));
    state_vec.extend_from_slice(y.row(at));
    Ok(InferenceResult {
        state: state_vec,
        latents: y,
        observed: x,
        final_loss: best_loss,
        initial_loss,
    })
}

/// Integrate the trained field from an augmented state for `horizon`
/// sampling intervals; returns the observed components per step.
pub fn forecast(trained: &TrainedModel, state: &[f64], horizon: usize) -> Result<TimeSeries> {
    if horizon == 0 {
        return Err(Error::invalid("forecast horizon must be >= 1"));
    }
    if state.len() != trained.model.d_e() {
        return Err(Error::DimensionMismatch {
            context: "forecast state",
            expected: trained.model.d_e(),
            got: state.len(),
        });
    }
    let traj = flow_trajectory(&trained.model, state, &trained.config.integrator, horizon)?;
    let n = trained.model.n_obs();
    let mut out = Mat::zeros(horizon, n);
    for k in 1..=horizon {
        out.row_mut(k - 1).copy_from_slice(&traj.row(k)[..n]);
    }
    TimeSeries::new(out, trained.config.integrator.dt, trained.config.integrator.dt)
}

/// Convenience: latent trajectory accessor used by evaluation code.
pub fn training_window(trained: &TrainedModel, start: usize, end: usize) -> LatentTrajectory {
    LatentTrajectory {
        x: trained.train_latents.x.slice_rows(start, end),
        y: trained.train_latents.y.slice_rows(start, end),
    }
}
