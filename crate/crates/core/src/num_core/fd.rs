//! Finite-difference verification utilities.
//!
//! These are the independent oracles against which the analytic Jacobians
//! and reverse-mode gradients are checked.

use crate::linalg::Mat;
use crate::num_core::VectorField;

/// Central finite-difference gradient of a scalar function.
pub fn central_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + h;
        let fp = f(&xp);
        xp[i] = orig - h;
        let fm = f(&xp);
        xp[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Central finite-difference Jacobian of a vector field.
pub fn jacobian_fd<F: VectorField + ?Sized>(field: &F, x: &[f64], h: f64) -> Mat {
    let d = field.dim();
    let mut out = Mat::zeros(d, d);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; d];
    let mut fm = vec![0.0; d];
    for j in 0..d {
        let orig = xp[j];
        xp[j] = orig + h;
        field.eval(&xp, &mut fp);
        xp[j] = orig - h;
        field.eval(&xp, &mut fm);
        xp[j] = orig;
        for i in 0..d {
            out.set(i, j, (fp[i] - fm[i]) / (2.0 * h));
        }
    }
    out
}

/// Componentwise relative error `|a-b| / max(|a|, |b|, floor)`.
///
/// Returns the maximum over all components. The floor keeps near-zero
/// entries from inflating the ratio.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}
