//! Adam optimizer with optional stepwise learning-rate decay and
//! per-coordinate step scaling.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Loss threshold beyond which an optimization run is aborted.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDecay {
    /// Multiplicative factor applied every `every` iterations.
    pub factor: f64,
    pub every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub step: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub iterations: usize,
    #[serde(default)]
    pub decay: Option<StepDecay>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            step: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            iterations: 1000,
            decay: None,
        }
    }
}

/// First/second moment state; reusable across custom optimization loops.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: usize,
}

impl AdamState {
    pub fn new(dim: usize) -> Self {
        AdamState {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// One bias-corrected update of `point`. `scale`, when given, multiplies
    /// the step size per coordinate (used for separate parameter/latent
    /// learning rates).
    pub fn step(
        &mut self,
        point: &mut [f64],
        grad: &[f64],
        cfg: &AdamConfig,
        scale: Option<&[f64]>,
    ) {
        debug_assert_eq!(point.len(), self.m.len());
        debug_assert_eq!(grad.len(), self.m.len());
        self.t += 1;
        let lr = match cfg.decay {
            Some(d) if d.every > 0 => cfg.step * d.factor.powi(((self.t - 1) / d.every) as i32),
            _ => cfg.step,
        };
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for i in 0..point.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * grad[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            let s = scale.map_or(1.0, |sc| sc[i]);
            point[i] -= lr * s * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamRun {
    /// Final iterate.
    pub point: Vec<f64>,
    /// Loss per iteration (evaluated before each update).
    pub loss_history: Vec<f64>,
    /// Lowest-loss iterate seen and its loss.
    pub best_point: Vec<f64>,
    pub best_loss: f64,
}

/// Minimize an objective with Adam.
///
/// The objective returns the loss and its gradient at a point. Decrease is
/// not guaranteed per iteration; the run tracks the best iterate alongside
/// the final one. Non-finite or runaway loss aborts with the iteration
/// index.
pub fn adam_minimize<F>(mut objective: F, x0: &[f64], cfg: &AdamConfig) -> Result<AdamRun>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut point = x0.to_vec();
    let mut state = AdamState::new(point.len());
    let mut history = Vec::with_capacity(cfg.iterations);
    let mut best_point = point.clone();
    let mut best_loss = f64::INFINITY;
    for it in 0..cfg.iterations {
        let (loss, grad) = objective(&point).map_err(|e| match e {
            Error::OptimizationDiverged { .. } => Error::OptimizationDiverged { iteration: it },
            other => other,
        })?;
        if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
            return Err(Error::OptimizationDiverged { iteration: it });
        }
        if grad.len() != point.len() {
            return Err(Error::DimensionMismatch {
                context: "adam gradient",
                expected: point.len(),
                got: grad.len(),
            });
        }
        history.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best_point.copy_from_slice(&point);
        }
        state.step(&mut point, &grad, cfg, None);
    }
    Ok(AdamRun {
        point,
        loss_history: history,
        best_point,
        best_loss,
    })
}
