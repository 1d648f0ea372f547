//! Parametric vector fields.

use crate::linalg::Mat;

/// An autonomous vector field `f_theta: R^d -> R^d` with a flat parameter
/// vector and an analytic Jacobian.
///
/// Evaluation must be pure: the same `(theta, x)` gives bit-identical
/// output. `vjp` is the reverse-mode primitive used by the loss gradients:
/// it accumulates `J(x)^T cot` into `grad_x` and `(df/dtheta)^T cot` into
/// `grad_theta`.
pub trait VectorField: Sync {
    /// State dimension d.
    fn dim(&self) -> usize;

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    fn param_len(&self) -> usize {
        self.params().len()
    }

    /// `out = f(x)`.
    fn eval(&self, x: &[f64], out: &mut [f64]);

    /// Analytic Jacobian `df/dx` at `x`, written into a d×d matrix.
    fn jacobian(&self, x: &[f64], out: &mut Mat);

    /// Accumulate the vector-Jacobian products for a cotangent `cot`.
    fn vjp(&self, x: &[f64], cot: &[f64], grad_x: &mut [f64], grad_theta: &mut [f64]);
}

/// Analytic Jacobian of `field` at `X`.
pub fn jacobian_at<F: VectorField + ?Sized>(field: &F, x: &[f64]) -> Mat {
    assert_eq!(x.len(), field.dim(), "jacobian_at: state dimension mismatch");
    let mut out = Mat::zeros(field.dim(), field.dim());
    field.jacobian(x, &mut out);
    out
}

/// Linear field `f(x) = A x`, parameters are the entries of A (row-major).
#[derive(Debug, Clone)]
pub struct LinearField {
    dim: usize,
    a: Vec<f64>,
}

impl LinearField {
    pub fn new(dim: usize, a: Vec<f64>) -> Self {
        assert_eq!(a.len(), dim * dim);
        LinearField { dim, a }
    }

    pub fn from_matrix(m: &Mat) -> Self {
        assert_eq!(m.rows(), m.cols());
        LinearField {
            dim: m.rows(),
            a: m.data().to_vec(),
        }
    }
}

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> &[f64] {
        &self.a
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.a
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        for k in 0..self.dim {
            let row = &self.a[k * self.dim..(k + 1) * self.dim];
            out[k] = row.iter().zip(x).map(|(a, xi)| a * xi).sum();
        }
    }

    fn jacobian(&self, _x: &[f64], out: &mut Mat) {
        for k in 0..self.dim {
            for m in 0..self.dim {
                out.set(k, m, self.a[k * self.dim + m]);
            }
        }
    }

    fn vjp(&self, x: &[f64], cot: &[f64], grad_x: &mut [f64], grad_theta: &mut [f64]) {
        for k in 0..self.dim {
            let ck = cot[k];
            for m in 0..self.dim {
                grad_x[m] += self.a[k * self.dim + m] * ck;
                grad_theta[k * self.dim + m] += ck * x[m];
            }
        }
    }
}

/// The zero field; integrating it leaves the state unchanged.
#[derive(Debug, Clone)]
pub struct ZeroField {
    dim: usize,
}

impl ZeroField {
    pub fn new(dim: usize) -> Self {
        ZeroField { dim }
    }
}

impl VectorField for ZeroField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> &[f64] {
        &[]
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut []
    }

    fn eval(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn jacobian(&self, _x: &[f64], out: &mut Mat) {
        out.data_mut().fill(0.0);
    }

    fn vjp(&self, _x: &[f64], _cot: &[f64], _grad_x: &mut [f64], _grad_theta: &mut [f64]) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num_core::fd;

    #[test]
    fn linear_field_jacobian_is_matrix() {
        let f = LinearField::new(2, vec![1.0, 2.0, 3.0, 4.0]);
        let j = jacobian_at(&f, &[0.7, -0.3]);
        assert_eq!(j.data(), &[1.0, 2.0, 3.0, 4.0]);
        // independent of the evaluation point
        let j2 = jacobian_at(&f, &[100.0, 5.0]);
        assert_eq!(j.data(), j2.data());
    }

    #[test]
    fn jacobian_of_sum_of_fields_is_sum_of_jacobians() {
        let a = LinearField::new(2, vec![1.0, -2.0, 0.5, 3.0]);
        let b = LinearField::new(2, vec![0.1, 0.2, 0.3, 0.4]);
        let sum = LinearField::new(2, vec![1.1, -1.8, 0.8, 3.4]);
        let x = [0.3, -1.2];
        let ja = jacobian_at(&a, &x);
        let jb = jacobian_at(&b, &x);
        let js = jacobian_at(&sum, &x);
        for i in 0..4 {
            assert!((ja.data()[i] + jb.data()[i] - js.data()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_field_vjp_matches_finite_differences() {
        let f = LinearField::new(3, vec![0.2, -1.0, 0.5, 0.9, 0.1, -0.3, 0.0, 2.0, -0.7]);
        let x = [0.4, -0.8, 1.3];
        let cot = [1.0, -2.0, 0.5];
        let mut gx = vec![0.0; 3];
        let mut gt = vec![0.0; 9];
        f.vjp(&x, &cot, &mut gx, &mut gt);

        // d(cot . f(x)) / dx via finite differences
        let g = |x: &[f64]| {
            let mut out = vec![0.0; 3];
            f.eval(x, &mut out);
            out.iter().zip(&cot).map(|(o, c)| o * c).sum::<f64>()
        };
        let fd_gx = fd::central_gradient(g, &x, 1e-6);
        for i in 0..3 {
            assert!((gx[i] - fd_gx[i]).abs() < 1e-6);
        }
    }
}
