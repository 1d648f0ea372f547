//! Sparse polynomial regression of a vector field from data: sequential
//! thresholded least squares over a degree-two monomial library.

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::num_core::{flow_trajectory, IntegratorConfig, VectorField};
use nalgebra::DMatrix;

/// Number of library terms for state dimension d: constant, linear, and
/// quadratic pairs with i <= j.
pub fn library_len(d: usize) -> usize {
    1 + d + d * (d + 1) / 2
}

/// Human-readable names of the library terms, in evaluation order.
pub fn monomial_descriptors(d: usize) -> Vec<String> {
    let mut names = vec!["1".to_string()];
    for i in 0..d {
        names.push(format!("x{}", i + 1));
    }
    for i in 0..d {
        for j in i..d {
            names.push(format!("x{}*x{}", i + 1, j + 1));
        }
    }
    names
}

fn library_row(x: &[f64], out: &mut [f64]) {
    let d = x.len();
    out[0] = 1.0;
    out[1..1 + d].copy_from_slice(x);
    let mut p = 1 + d;
    for i in 0..d {
        for j in i..d {
            out[p] = x[i] * x[j];
            p += 1;
        }
    }
}

/// Vector field `f_c(x) = sum_p Theta_p(x) Xi[p][c]` with thresholded
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseModel {
    pub dim: usize,
    pub threshold: f64,
    /// P × d coefficient matrix over the monomial library.
    pub coefficients: Mat,
}

impl SparseModel {
    /// Indices `(term, output)` of the surviving coefficients.
    pub fn active_terms(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for p in 0..self.coefficients.rows() {
            for c in 0..self.coefficients.cols() {
                if self.coefficients.get(p, c) != 0.0 {
                    out.push((p, c));
                }
            }
        }
        out
    }
}

impl VectorField for SparseModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> &[f64] {
        self.coefficients.data()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.coefficients.data_mut()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) {
        let mut theta = vec![0.0; library_len(self.dim)];
        library_row(x, &mut theta);
        for c in 0..self.dim {
            out[c] = theta
                .iter()
                .enumerate()
                .map(|(p, t)| t * self.coefficients.get(p, c))
                .sum();
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut Mat) {
        let d = self.dim;
        for c in 0..d {
            for v in 0..d {
                // d/dx_v of [1, x, x_i x_j] dotted with column c
                let mut s = self.coefficients.get(1 + v, c);
                let mut p = 1 + d;
                for i in 0..d {
                    for j in i..d {
                        let xi = self.coefficients.get(p, c);
                        if xi != 0.0 {
                            if i == v {
                                s += xi * x[j];
                            }
                            if j == v {
                                s += xi * x[i];
                            }
                        }
                        p += 1;
                    }
                }
                out.set(c, v, s);
            }
        }
    }

    fn vjp(&self, x: &[f64], cot: &[f64], grad_x: &mut [f64], grad_theta: &mut [f64]) {
        let d = self.dim;
        let mut jac = Mat::zeros(d, d);
        self.jacobian(x, &mut jac);
        for v in 0..d {
            for c in 0..d {
                grad_x[v] += jac.get(c, v) * cot[c];
            }
        }
        let mut theta = vec![0.0; library_len(d)];
        library_row(x, &mut theta);
        for (p, t) in theta.iter().enumerate() {
            for c in 0..d {
                grad_theta[p * d + c] += t * cot[c];
            }
        }
    }
}

/// Least squares restricted to the active library columns; returns the
/// dense coefficient column with zeros elsewhere.
fn restricted_lsq(theta: &DMatrix<f64>, y: &DMatrix<f64>, active: &[bool]) -> Result<Vec<f64>> {
    let cols: Vec<usize> = active
        .iter()
        .enumerate()
        .filter(|(_, a)| **a)
        .map(|(i, _)| i)
        .collect();
    let mut out = vec![0.0; active.len()];
    if cols.is_empty() {
        return Ok(out);
    }
    let sub = theta.select_columns(cols.iter());
    let svd = sub.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin / smax < 1e-10 {
        return Err(Error::SingularRegression { columns: cols });
    }
    let beta = svd
        .solve(y, 1e-12)
        .map_err(|_| Error::SingularRegression { columns: cols.clone() })?;
    for (r, &c) in cols.iter().enumerate() {
        out[c] = beta[(r, 0)];
    }
    Ok(out)
}

/// Fit a sparse polynomial vector field to a uniformly sampled trajectory.
///
/// Time derivatives come from centered differences; each state component is
/// regressed onto the monomial library with sequential thresholded least
/// squares (coefficients below `threshold` in magnitude are pruned and the
/// remainder refit until the support stabilizes).
pub fn sparse_fit(series: &TimeSeries, threshold: f64) -> Result<SparseModel> {
    if threshold < 0.0 {
        return Err(Error::invalid("threshold must be >= 0"));
    }
    let t_len = series.len();
    let d = series.dim();
    if t_len < 3 {
        return Err(Error::SeriesTooShort {
            needed: 3,
            have: t_len,
        });
    }
    let p_len = library_len(d);
    let rows = t_len - 2;
    let mut theta = DMatrix::zeros(rows, p_len);
    let mut deriv = DMatrix::zeros(rows, d);
    let inv2dt = 1.0 / (2.0 * series.dt);
    let mut row_buf = vec![0.0; p_len];
    for t in 1..t_len - 1 {
        library_row(series.values.row(t), &mut row_buf);
        for (p, v) in row_buf.iter().enumerate() {
            theta[(t - 1, p)] = *v;
        }
        for c in 0..d {
            deriv[(t - 1, c)] =
                (series.values.get(t + 1, c) - series.values.get(t - 1, c)) * inv2dt;
        }
    }

    let mut coefficients = Mat::zeros(p_len, d);
    for c in 0..d {
        let y = DMatrix::from_fn(rows, 1, |r, _| deriv[(r, c)]);
        let mut active = vec![true; p_len];
        let mut xi = restricted_lsq(&theta, &y, &active)?;
        for _ in 0..20 {
            let next: Vec<bool> = xi.iter().map(|v| v.abs() >= threshold).collect();
            if next == active {
                break;
            }
            active = next;
            xi = restricted_lsq(&theta, &y, &active)?;
            for (v, a) in xi.iter_mut().zip(&active) {
                if !*a {
                    *v = 0.0;
                }
            }
        }
        for (p, v) in xi.iter().enumerate() {
            let keep = if threshold > 0.0 { v.abs() >= threshold } else { true };
            coefficients.set(p, c, if keep { *v } else { 0.0 });
        }
    }
    Ok(SparseModel {
        dim: d,
        threshold,
        coefficients,
    })
}

/// Integrate the fitted field for `horizon` sampling intervals from `x0`.
/// Row h is the state h+1 steps ahead.
pub fn sparse_forecast(
    model: &SparseModel,
    x0: &[f64],
    dt: f64,
    substeps: usize,
    horizon: usize,
) -> Result<Mat> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let cfg = IntegratorConfig::new(dt, substeps)?;
    let traj = flow_trajectory(model, x0, &cfg, horizon)?;
    Ok(traj.slice_rows(1, horizon + 1))
}

/// Plain-text coefficient table, one line per library term.
pub fn sparse_model_to_table(model: &SparseModel) -> String {
    let names = monomial_descriptors(model.dim);
    let mut out = String::from("term");
    for c in 0..model.dim {
        out.push_str(&format!(",dx{}/dt", c + 1));
    }
    out.push('\n');
    for (p, name) in names.iter().enumerate() {
        out.push_str(name);
        for c in 0..model.dim {
            let v = model.coefficients.get(p, c);
            if v == 0.0 {
                out.push_str(",0");
            } else {
                out.push_str(&format!(",{v:.6}"));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate_lorenz63, Lorenz63Params};

    #[test]
    fn descriptor_order_matches_library_evaluation() {
        assert_eq!(
            monomial_descriptors(2),
            ["1", "x1", "x2", "x1*x1", "x1*x2", "x2*x2"]
        );
        let mut row = vec![0.0; library_len(2)];
        library_row(&[2.0, 3.0], &mut row);
        assert_eq!(row, [1.0, 2.0, 3.0, 4.0, 6.0, 9.0]);
    }

    fn lorenz_series(dt: f64, steps: usize) -> TimeSeries {
        simulate_lorenz63([1.0, 2.0, 24.0], dt, steps, Lorenz63Params::default(), 4).unwrap()
    }

    #[test]
    fn recovers_lorenz_coefficients() {
        let ts = lorenz_series(0.001, 30_000);
        let model = sparse_fit(&ts, 0.05).unwrap();
        let names = monomial_descriptors(3);
        let idx = |n: &str| names.iter().position(|m| m == n).unwrap();
        // sigma=10, rho=28, beta=8/3 in standard form
        let expect = [
            (idx("x1"), 0, -10.0),
            (idx("x2"), 0, 10.0),
            (idx("x1"), 1, 28.0),
            (idx("x2"), 1, -1.0),
            (idx("x1*x3"), 1, -1.0),
            (idx("x1*x2"), 2, 1.0),
            (idx("x3"), 2, -8.0 / 3.0),
        ];
        for &(p, c, v) in &expect {
            let got = model.coefficients.get(p, c);
            assert!(
                ((got - v) / v).abs() <= 1e-2,
                "term {} col {c}: {got} vs {v}",
                names[p]
            );
        }
        // no spurious terms beyond the seven
        assert_eq!(model.active_terms().len(), 7, "{}", sparse_model_to_table(&model));
    }

    #[test]
    fn zero_threshold_is_plain_least_squares() {
        let ts = lorenz_series(0.002, 2_000);
        let model = sparse_fit(&ts, 0.0).unwrap();
        // every library coefficient survives
        assert_eq!(model.active_terms().len(), library_len(3) * 3);
    }

    #[test]
    fn surviving_coefficients_exceed_the_threshold() {
        let ts = lorenz_series(0.002, 10_000);
        let model = sparse_fit(&ts, 0.05).unwrap();
        for (p, c) in model.active_terms() {
            assert!(model.coefficients.get(p, c).abs() >= 0.05);
        }
    }

    #[test]
    fn constant_series_reports_singular_columns() {
        let ts = TimeSeries::new(Mat::from_vec(50, 1, vec![3.0; 50]), 0.1, 0.0).unwrap();
        match sparse_fit(&ts, 0.1) {
            Err(Error::SingularRegression { columns }) => assert!(!columns.is_empty()),
            other => panic!("expected SingularRegression, got {other:?}"),
        }
    }

    #[test]
    fn forecast_matches_direct_integration_of_the_true_field() {
        // fit on fine data, then one forecast step should track the truth
        let ts = lorenz_series(0.001, 30_000);
        let model = sparse_fit(&ts, 0.05).unwrap();
        let x0 = [2.0, -1.0, 22.0];
        let pred = sparse_forecast(&model, &x0, 0.01, 4, 10).unwrap();
        let truth = simulate_lorenz63(x0, 0.01, 10, Lorenz63Params::default(), 4).unwrap();
        for h in 0..10 {
            let err = crate::linalg::dist2(pred.row(h), truth.values.row(h + 1)).sqrt();
            assert!(err < 0.05, "step {h}: error {err}");
        }
    }
}
