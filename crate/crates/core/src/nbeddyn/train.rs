//! Joint training of field parameters and latent states.

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nbeddyn::{BilinearODEModel, ModelArch};
use crate::num_core::{
    loss_and_gradients, rk4_step, AdamConfig, AdamState, IntegratorConfig, StepDecay,
    VectorField, DIVERGENCE_LIMIT,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Per-timestep augmented states: fixed observed rows plus optimizable
/// latent rows. `X_t = [x_t, y_t]`, observed-first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTrajectory {
    pub x: Mat,
    pub y: Mat,
}

impl LatentTrajectory {
    pub fn new(x: Mat, y: Mat) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::DimensionMismatch {
                context: "latent trajectory rows",
                expected: x.rows(),
                got: y.rows(),
            });
        }
        Ok(LatentTrajectory { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    /// Augmented row `[x_t, y_t]`.
    pub fn augmented(&self, t: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.x.cols() + self.y.cols());
        out.extend_from_slice(self.x.row(t));
        out.extend_from_slice(self.y.row(t));
        out
    }
}

/// Strategy for initializing the latent trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub enum LatentInit {
    /// I.i.d. Gaussian(0, `latent_init_scale`^2).
    #[default]
    Random,
    /// Lagged copies of the first observed column scaled by
    /// `latent_init_scale`: `y_t^{(k)} = s * x_{t-(k+1) tau}`, clamped at
    /// the series start. Starts the latents on a delay-coordinate
    /// reconstruction of the attractor instead of noise.
    Delay { tau: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Weight of the flow-consistency coupling term.
    pub lambda: f64,
    pub epochs: usize,
    /// Adam step for the field parameters.
    pub theta_step: f64,
    /// Adam step for the latent states.
    pub latent_step: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub decay: Option<StepDecay>,
    pub seed: u64,
    /// Weight of the energy-conservation penalty on the quadratic
    /// coefficients (0 disables it). Keeps the learned quadratic terms from
    /// creating energy, which stabilizes long free runs.
    #[serde(default)]
    pub energy_reg: f64,
    #[serde(default)]
    pub latent_init: LatentInit,
    /// Std-dev (Random) or amplitude (Delay) of the latent initialization.
    pub latent_init_scale: f64,
    /// Std-dev of the Gaussian parameter initialization.
    pub theta_init_scale: f64,
    pub integrator: IntegratorConfig,
    pub arch: ModelArch,
    /// Single Adam instance over the concatenated (theta, y) when true;
    /// alternating theta/latent updates otherwise.
    pub joint: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1.0,
            epochs: 5000,
            theta_step: 1e-3,
            latent_step: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decay: None,
            seed: 0,
            energy_reg: 0.0,
            latent_init: LatentInit::Random,
            latent_init_scale: 0.1,
            theta_init_scale: 0.01,
            integrator: IntegratorConfig { dt: 0.01, substeps: 1 },
            arch: ModelArch::bilinear(),
            joint: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model: BilinearODEModel,
    pub train_latents: LatentTrajectory,
    pub loss_history: Vec<f64>,
    pub config: TrainConfig,
    pub train_dt: f64,
    /// Set when training was cut short by a divergence; the stored state is
    /// the best finite iterate seen before the blow-up.
    pub diverged_at: Option<usize>,
}

impl TrainedModel {
    /// One-step RMSE on the observed components of the training sequence.
    pub fn train_one_step_rmse(&self) -> Result<f64> {
        let lt = &self.train_latents;
        let n = lt.x.cols();
        let mut sq = 0.0;
        let mut count = 0usize;
        for t in 1..lt.len() {
            let pred = rk4_step(&self.model, &lt.augmented(t - 1), &self.config.integrator)?;
            for k in 0..n {
                let r = lt.x.get(t, k) - pred[k];
                sq += r * r;
                count += 1;
            }
        }
        Ok((sq / count as f64).sqrt())
    }
}

/// I.i.d. Gaussian(0, scale^2) latent initialization, deterministic per seed.
pub fn init_latent(t_len: usize, dim: usize, scale: f64, seed: u64) -> Mat {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Mat::zeros(t_len, dim);
    for v in m.data_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *v = scale * e;
    }
    m
}

/// Delay-coordinate latent initialization: column k holds the observed
/// first column lagged by (k+1) tau, clamped at the series start.
pub fn init_latent_delay(x: &Mat, dim: usize, tau: usize, scale: f64) -> Mat {
    let t_len = x.rows();
    let mut m = Mat::zeros(t_len, dim);
    for t in 0..t_len {
        for k in 0..dim {
            let lag = (k + 1) * tau;
            let src = t.saturating_sub(lag);
            m.set(t, k, scale * x.get(src, 0));
        }
    }
    m
}

/// Train an augmented latent ODE on an observed series.
pub fn train(observations: &TimeSeries, d_e: usize, cfg: &TrainConfig) -> Result<TrainedModel> {
    train_with_callback(observations, d_e, cfg, |_, _, _, _| {})
}

/// As [`train`], invoking `callback(epoch, model, latents, loss)` after
/// every epoch (used for latent-trajectory snapshots).
pub fn train_with_callback<C>(
    observations: &TimeSeries,
    d_e: usize,
    cfg: &TrainConfig,
    mut callback: C,
) -> Result<TrainedModel>
where
    C: FnMut(usize, &BilinearODEModel, &Mat, f64),
{
    let n = observations.dim();
    let t_len = observations.len();
    if d_e < n {
        return Err(Error::invalid(format!(
            "augmented dimension {d_e} must be >= observed dimension {n}"
        )));
    }
    if t_len < 3 {
        return Err(Error::SeriesTooShort {
            needed: 3,
            have: t_len,
        });
    }
    if cfg.epochs == 0 {
        return Err(Error::invalid("epochs must be >= 1"));
    }
    let latent_dim = d_e - n;
    let x = observations.values.clone();
    let mut model = BilinearODEModel::new(d_e, n, cfg.arch)?;
    model.init_random(cfg.theta_init_scale, cfg.seed);
    let y0 = match cfg.latent_init {
        LatentInit::Random => {
            init_latent(t_len, latent_dim, cfg.latent_init_scale, cfg.seed.wrapping_add(1))
        }
        LatentInit::Delay { tau } => {
            if tau == 0 {
                return Err(Error::invalid("delay latent init requires tau >= 1"));
            }
            init_latent_delay(&x, latent_dim, tau, cfg.latent_init_scale)
        }
    };

    let p_len = model.param_len();
    let y_len = t_len * latent_dim;
    // concatenated optimization vector [theta; y]
    let mut point = Vec::with_capacity(p_len + y_len);
    point.extend_from_slice(model.params());
    point.extend_from_slice(y0.data());

    let adam_cfg = AdamConfig {
        step: cfg.theta_step,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        epsilon: cfg.epsilon,
        iterations: cfg.epochs,
        decay: cfg.decay,
    };
    // per-coordinate scale implements the separate latent learning rate
    let scale: Vec<f64> = (0..p_len + y_len)
        .map(|i| {
            if i < p_len {
                1.0
            } else {
                cfg.latent_step / cfg.theta_step
            }
        })
        .collect();

    let mut joint_state = AdamState::new(p_len + y_len);
    let mut theta_state = AdamState::new(p_len);
    let mut latent_state = AdamState::new(y_len);

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best_point = point.clone();
    let mut best_loss = f64::INFINITY;
    let mut diverged_at = None;
    let mut y = y0;

    for epoch in 0..cfg.epochs {
        model.params_mut().copy_from_slice(&point[..p_len]);
        y.data_mut().copy_from_slice(&point[p_len..]);
        let mut g = match loss_and_gradients(&model, &x, &y, cfg.lambda, &cfg.integrator) {
            Ok(g) => g,
            Err(_) => {
                diverged_at = Some(epoch);
                break;
            }
        };
        if cfg.energy_reg > 0.0 {
            let p = model.quad_energy_penalty(cfg.energy_reg, Some(&mut g.grad_theta));
            g.loss += cfg.energy_reg * p;
        }
        if !g.loss.is_finite() || g.loss > DIVERGENCE_LIMIT {
            diverged_at = Some(epoch);
            break;
        }
        history.push(g.loss);
        if g.loss < best_loss {
            best_loss = g.loss;
            best_point.copy_from_slice(&point);
        }
        callback(epoch, &model, &y, g.loss);

        if cfg.joint {
            let mut grad = Vec::with_capacity(p_len + y_len);
            grad.extend_from_slice(&g.grad_theta);
            grad.extend_from_slice(g.grad_latent.data());
            joint_state.step(&mut point, &grad, &adam_cfg, Some(&scale));
        } else if epoch % 2 == 0 {
            theta_state.step(&mut point[..p_len], &g.grad_theta, &adam_cfg, None);
        } else {
            let latent_cfg = AdamConfig {
                step: cfg.latent_step,
                ..adam_cfg
            };
            latent_state.step(&mut point[p_len..], g.grad_latent.data(), &latent_cfg, None);
        }
    }

    if !best_loss.is_finite() {
        return Err(Error::OptimizationDiverged {
            iteration: diverged_at.unwrap_or(0),
        });
    }

    // return the lowest-loss iterate
    model.params_mut().copy_from_slice(&best_point[..p_len]);
    y.data_mut().copy_from_slice(&best_point[p_len..]);
    Ok(TrainedModel {
        model,
        train_latents: LatentTrajectory::new(x, y)?,
        loss_history: history,
        config: cfg.clone(),
        train_dt: observations.dt,
        diverged_at,
    })
}
