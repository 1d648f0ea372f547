//! Classical 4th-order Runge-Kutta flow map and its reverse-mode adjoint.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::num_core::VectorField;
use serde::{Deserialize, Serialize};

/// Integration of one sampling interval `dt`, split into `substeps`
/// internal RK4 steps of size `dt / substeps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub substeps: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, substeps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if substeps == 0 {
            return Err(Error::invalid("substeps must be >= 1"));
        }
        Ok(IntegratorConfig { dt, substeps })
    }

    fn h(&self) -> f64 {
        self.dt / self.substeps as f64
    }
}

/// Scratch buffers reused across RK4 forward and backward passes.
pub(crate) struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    x2: Vec<f64>,
    x3: Vec<f64>,
    x4: Vec<f64>,
    gk: Vec<f64>,
    gx_stage: Vec<f64>,
    cur: Vec<f64>,
}

impl Rk4Workspace {
    pub fn new(dim: usize) -> Self {
        Rk4Workspace {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            x2: vec![0.0; dim],
            x3: vec![0.0; dim],
            x4: vec![0.0; dim],
            gk: vec![0.0; dim],
            gx_stage: vec![0.0; dim],
            cur: vec![0.0; dim],
        }
    }
}

/// One internal RK4 step of size `h`; `x` is advanced in place.
fn rk4_substep<F: VectorField + ?Sized>(field: &F, x: &mut [f64], h: f64, ws: &mut Rk4Workspace) {
    let d = x.len();
    field.eval(x, &mut ws.k1);
    for i in 0..d {
        ws.x2[i] = x[i] + 0.5 * h * ws.k1[i];
    }
    field.eval(&ws.x2, &mut ws.k2);
    for i in 0..d {
        ws.x3[i] = x[i] + 0.5 * h * ws.k2[i];
    }
    field.eval(&ws.x3, &mut ws.k3);
    for i in 0..d {
        ws.x4[i] = x[i] + h * ws.k3[i];
    }
    field.eval(&ws.x4, &mut ws.k4);
    for i in 0..d {
        x[i] += h / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
    }
}

/// In-place step over a full sampling interval; errors on blow-up with the
/// offending substep index.
pub(crate) fn rk4_step_into<F: VectorField + ?Sized>(
    field: &F,
    x: &[f64],
    cfg: &IntegratorConfig,
    out: &mut [f64],
    ws: &mut Rk4Workspace,
) -> Result<()> {
    out.copy_from_slice(x);
    let h = cfg.h();
    for s in 0..cfg.substeps {
        rk4_substep(field, out, h, ws);
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::IntegrationDiverged { step: s });
        }
    }
    Ok(())
}

/// Advance the state of `field` by one sampling interval with classical RK4.
pub fn rk4_step<F: VectorField + ?Sized>(
    field: &F,
    x: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    if x.len() != field.dim() {
        return Err(Error::DimensionMismatch {
            context: "rk4_step state",
            expected: field.dim(),
            got: x.len(),
        });
    }
    let mut ws = Rk4Workspace::new(x.len());
    let mut out = vec![0.0; x.len()];
    rk4_step_into(field, x, cfg, &mut out, &mut ws)?;
    Ok(out)
}

/// Trajectory of the flow map: row 0 is `x0`, row k+1 = RK4 step of row k.
pub fn flow_trajectory<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    cfg: &IntegratorConfig,
    steps: usize,
) -> Result<Mat> {
    if x0.len() != field.dim() {
        return Err(Error::DimensionMismatch {
            context: "flow_trajectory state",
            expected: field.dim(),
            got: x0.len(),
        });
    }
    let d = x0.len();
    let mut out = Mat::zeros(steps + 1, d);
    out.row_mut(0).copy_from_slice(x0);
    let mut ws = Rk4Workspace::new(d);
    let mut cur = x0.to_vec();
    let mut next = vec![0.0; d];
    for k in 0..steps {
        rk4_step_into(field, &cur, cfg, &mut next, &mut ws)
            .map_err(|_| Error::IntegrationDiverged { step: k + 1 })?;
        out.row_mut(k + 1).copy_from_slice(&next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(out)
}

/// Forward pass storing each substep input on `tape` (substeps × d values);
/// `out` receives the final state.
pub(crate) fn rk4_forward_tape<F: VectorField + ?Sized>(
    field: &F,
    x: &[f64],
    cfg: &IntegratorConfig,
    out: &mut [f64],
    tape: &mut Vec<f64>,
    ws: &mut Rk4Workspace,
) -> Result<()> {
    tape.clear();
    out.copy_from_slice(x);
    let h = cfg.h();
    for s in 0..cfg.substeps {
        tape.extend_from_slice(out);
        rk4_substep(field, out, h, ws);
        if !out.iter().all(|v| v.is_finite()) {
            return Err(Error::IntegrationDiverged { step: s });
        }
    }
    Ok(())
}

/// Reverse pass through a taped RK4 interval.
///
/// On entry `cot` holds dL/d(out); on exit it holds dL/d(x). Parameter
/// gradients are accumulated into `grad_theta`. Stage states are recomputed
/// from the taped substep inputs.
pub(crate) fn rk4_backward<F: VectorField + ?Sized>(
    field: &F,
    cfg: &IntegratorConfig,
    tape: &[f64],
    cot: &mut [f64],
    grad_theta: &mut [f64],
    ws: &mut Rk4Workspace,
) {
    let d = field.dim();
    let h = cfg.h();
    debug_assert_eq!(tape.len(), cfg.substeps * d);
    for s in (0..cfg.substeps).rev() {
        let x = &tape[s * d..(s + 1) * d];
        // recompute stage states
        field.eval(x, &mut ws.k1);
        for i in 0..d {
            ws.x2[i] = x[i] + 0.5 * h * ws.k1[i];
        }
        field.eval(&ws.x2, &mut ws.k2);
        for i in 0..d {
            ws.x3[i] = x[i] + 0.5 * h * ws.k2[i];
        }
        field.eval(&ws.x3, &mut ws.k3);
        for i in 0..d {
            ws.x4[i] = x[i] + h * ws.k3[i];
        }

        // out = x + h/6 (k1 + 2 k2 + 2 k3 + k4), cot = dL/d(out)
        ws.cur.copy_from_slice(cot); // accumulates dL/dx for this substep

        // k4 = f(x4), x4 = x + h k3
        for i in 0..d {
            ws.gk[i] = h / 6.0 * cot[i];
        }
        ws.gx_stage.fill(0.0);
        field.vjp(&ws.x4, &ws.gk, &mut ws.gx_stage, grad_theta);
        for i in 0..d {
            ws.cur[i] += ws.gx_stage[i];
        }
        // dL/dk3 = h/3 cot + h * dL/dx4
        for i in 0..d {
            ws.gk[i] = h / 3.0 * cot[i] + h * ws.gx_stage[i];
        }
        ws.gx_stage.fill(0.0);
        field.vjp(&ws.x3, &ws.gk, &mut ws.gx_stage, grad_theta);
        for i in 0..d {
            ws.cur[i] += ws.gx_stage[i];
        }
        // dL/dk2 = h/3 cot + h/2 * dL/dx3
        for i in 0..d {
            ws.gk[i] = h / 3.0 * cot[i] + 0.5 * h * ws.gx_stage[i];
        }
        ws.gx_stage.fill(0.0);
        field.vjp(&ws.x2, &ws.gk, &mut ws.gx_stage, grad_theta);
        for i in 0..d {
            ws.cur[i] += ws.gx_stage[i];
        }
        // dL/dk1 = h/6 cot + h/2 * dL/dx2
        for i in 0..d {
            ws.gk[i] = h / 6.0 * cot[i] + 0.5 * h * ws.gx_stage[i];
        }
        ws.gx_stage.fill(0.0);
        field.vjp(x, &ws.gk, &mut ws.gx_stage, grad_theta);
        for i in 0..d {
            ws.cur[i] += ws.gx_stage[i];
        }

        cot.copy_from_slice(&ws.cur);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num_core::{LinearField, ZeroField};

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let f = ZeroField::new(3);
        let cfg = IntegratorConfig::new(0.1, 1).unwrap();
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(rk4_step(&f, &x, &cfg).unwrap(), x);
    }

    #[test]
    fn scalar_decay_matches_exponential() {
        // f(z) = -z, one RK4 step of 0.1 vs e^{-0.1}
        let f = LinearField::new(1, vec![-1.0]);
        let cfg = IntegratorConfig::new(0.1, 1).unwrap();
        let out = rk4_step(&f, &[1.0], &cfg).unwrap();
        assert!((out[0] - 0.904_837_42).abs() < 1e-7, "got {}", out[0]);
    }

    #[test]
    fn rk4_is_fourth_order_on_scalar_decay() {
        // global error over unit time; halving the internal step must shrink
        // it by roughly 2^4
        let f = LinearField::new(1, vec![-1.0]);
        let exact = (-1.0f64).exp();
        let err = |substeps: usize| {
            let cfg = IntegratorConfig::new(1.0, substeps).unwrap();
            (rk4_step(&f, &[1.0], &cfg).unwrap()[0] - exact).abs()
        };
        let ratio = err(8) / err(16);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn trajectory_with_zero_steps_is_single_row() {
        let f = ZeroField::new(2);
        let cfg = IntegratorConfig::new(0.1, 1).unwrap();
        let traj = flow_trajectory(&f, &[1.0, 2.0], &cfg, 0).unwrap();
        assert_eq!(traj.rows(), 1);
        assert_eq!(traj.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn rotation_field_conserves_norm() {
        // skew-symmetric linear field: |x| is an invariant of the flow
        let f = LinearField::new(2, vec![0.0, -1.0, 1.0, 0.0]);
        let cfg = IntegratorConfig::new(0.01, 1).unwrap();
        let traj = flow_trajectory(&f, &[1.0, 0.0], &cfg, 1000).unwrap();
        for i in 0..=1000 {
            let r = traj.row(i);
            let norm = (r[0] * r[0] + r[1] * r[1]).sqrt();
            assert!((norm - 1.0).abs() < 1e-6, "norm {norm} at step {i}");
        }
    }

    #[test]
    fn blow_up_reports_step_index() {
        // f(z) = z^2-ish via large linear rate exploding to inf quickly
        let f = LinearField::new(1, vec![1e6]);
        let cfg = IntegratorConfig::new(10.0, 50).unwrap();
        match rk4_step(&f, &[1.0], &cfg) {
            Err(Error::IntegrationDiverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(IntegratorConfig::new(0.0, 1).is_err());
        assert!(IntegratorConfig::new(0.1, 0).is_err());
        assert!(IntegratorConfig::new(f64::NAN, 1).is_err());
    }
}
