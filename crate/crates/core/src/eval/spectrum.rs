//! Eigenvalue spectrum of a vector field's Jacobian along a trajectory.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::num_core::{jacobian_at, VectorField};

/// Relative modulus below which an eigenvalue does not count towards the
/// effective dimension.
const EFFECTIVE_DIM_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Eigenvalues as (re, im), sorted by modulus, largest first.
    pub eigenvalues: Vec<(f64, f64)>,
    /// Count of eigenvalues with modulus >= 1e-2 of the largest.
    pub effective_dim: usize,
}

impl SpectrumReport {
    pub fn moduli(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .map(|(re, im)| re.hypot(*im))
            .collect()
    }
}

/// Spectrum of the Jacobian of `field` at one state.
pub fn jacobian_spectrum<F: VectorField + ?Sized>(field: &F, x: &[f64]) -> Result<SpectrumReport> {
    if x.len() != field.dim() {
        return Err(Error::DimensionMismatch {
            context: "jacobian_spectrum state",
            expected: field.dim(),
            got: x.len(),
        });
    }
    let jac = jacobian_at(field, x).to_nalgebra();
    let schur = nalgebra::linalg::Schur::try_new(jac, 1e-12, 10_000)
        .ok_or(Error::EigenFailure { state: 0 })?;
    let eig = schur.complex_eigenvalues();
    let mut eigenvalues: Vec<(f64, f64)> = eig.iter().map(|c| (c.re, c.im)).collect();
    eigenvalues.sort_by(|a, b| {
        let (ma, mb) = (a.0.hypot(a.1), b.0.hypot(b.1));
        mb.partial_cmp(&ma).unwrap()
    });
    let max = eigenvalues
        .first()
        .map(|(re, im)| re.hypot(*im))
        .unwrap_or(0.0);
    let effective_dim = if max == 0.0 {
        0
    } else {
        eigenvalues
            .iter()
            .filter(|(re, im)| re.hypot(*im) >= EFFECTIVE_DIM_THRESHOLD * max)
            .count()
    };
    Ok(SpectrumReport {
        eigenvalues,
        effective_dim,
    })
}

/// Spectra at every row of `states`; the error reports the failing row.
pub fn spectrum_over<F: VectorField + ?Sized>(
    field: &F,
    states: &Mat,
) -> Result<Vec<SpectrumReport>> {
    (0..states.rows())
        .map(|i| {
            jacobian_spectrum(field, states.row(i)).map_err(|e| match e {
                Error::EigenFailure { .. } => Error::EigenFailure { state: i },
                other => other,
            })
        })
        .collect()
}
