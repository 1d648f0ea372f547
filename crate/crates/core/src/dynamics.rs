//! Ground-truth simulators, observation operators, observation noise, and
//! PCA preprocessing for multivariate inputs.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::num_core::{flow_trajectory, IntegratorConfig, VectorField};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Uniformly sampled multivariate real-valued observation sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub values: Mat,
    pub dt: f64,
    pub start_time: f64,
}

impl TimeSeries {
    pub fn new(values: Mat, dt: f64, start_time: f64) -> Result<Self> {
        if values.rows() == 0 {
            return Err(Error::invalid("time series must have at least one row"));
        }
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if !values.is_finite() {
            return Err(Error::invalid("time series contains non-finite values"));
        }
        Ok(TimeSeries {
            values,
            dt,
            start_time,
        })
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.start_time + i as f64 * self.dt
    }

    /// Single-column view of column `j` as a scalar series.
    pub fn column_series(&self, j: usize) -> Result<TimeSeries> {
        if j >= self.dim() {
            return Err(Error::DimensionMismatch {
                context: "column index",
                expected: self.dim(),
                got: j,
            });
        }
        let col = self.values.column(j);
        TimeSeries::new(Mat::from_vec(col.len(), 1, col), self.dt, self.start_time)
    }

    /// Rows `start..end` as a new series, with the start time shifted.
    pub fn window(&self, start: usize, end: usize) -> TimeSeries {
        TimeSeries {
            values: self.values.slice_rows(start, end),
            dt: self.dt,
            start_time: self.time(start),
        }
    }
}

/// Map from a simulated state to the measured variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ObservationOperator {
    /// Keep the listed state components, in order.
    ComponentSelection(Vec<usize>),
    /// For a 2-column (Re, Im) complex representation: keep the real part.
    RealPartOfComplex,
    /// `x = P z`, one row of `P` per observed dimension.
    LinearProjection(Mat),
}

/// The Lorenz-63 vector field with parameters `[sigma, rho, beta]`.
#[derive(Debug, Clone)]
pub struct Lorenz63Field {
    params: [f64; 3],
}

impl Lorenz63Field {
    pub fn new(sigma: f64, rho: f64, beta: f64) -> Self {
        Lorenz63Field {
            params: [sigma, rho, beta],
        }
    }

    /// The classical chaotic parametrization: sigma=10, rho=28, beta=8/3.
    pub fn classic() -> Self {
        Lorenz63Field::new(10.0, 28.0, 8.0 / 3.0)
    }
}

impl VectorField for Lorenz63Field {
    fn dim(&self) -> usize {
        3
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn eval(&self, z: &[f64], out: &mut [f64]) {
        let [sigma, rho, beta] = self.params;
        out[0] = sigma * (z[1] - z[0]);
        out[1] = z[0] * (rho - z[2]) - z[1];
        out[2] = z[0] * z[1] - beta * z[2];
    }

    fn jacobian(&self, z: &[f64], out: &mut Mat) {
        let [sigma, rho, beta] = self.params;
        out.row_mut(0).copy_from_slice(&[-sigma, sigma, 0.0]);
        out.row_mut(1).copy_from_slice(&[rho - z[2], -1.0, -z[0]]);
        out.row_mut(2).copy_from_slice(&[z[1], z[0], -beta]);
    }

    fn vjp(&self, z: &[f64], cot: &[f64], grad_x: &mut [f64], grad_theta: &mut [f64]) {
        let [sigma, rho, beta] = self.params;
        grad_x[0] += -sigma * cot[0] + (rho - z[2]) * cot[1] + z[1] * cot[2];
        grad_x[1] += sigma * cot[0] - cot[1] + z[0] * cot[2];
        grad_x[2] += -z[0] * cot[1] - beta * cot[2];
        grad_theta[0] += (z[1] - z[0]) * cot[0];
        grad_theta[1] += z[0] * cot[1];
        grad_theta[2] += -z[2] * cot[2];
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lorenz63Params {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl Default for Lorenz63Params {
    fn default() -> Self {
        Lorenz63Params {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
        }
    }
}

/// RK4-integrated Lorenz-63 trajectory sampled every `dt` (3 columns).
pub fn simulate_lorenz63(
    z0: [f64; 3],
    dt: f64,
    steps: usize,
    params: Lorenz63Params,
    substeps: usize,
) -> Result<TimeSeries> {
    let field = Lorenz63Field::new(params.sigma, params.rho, params.beta);
    let cfg = IntegratorConfig::new(dt, substeps)?;
    let traj = flow_trajectory(&field, &z0, &cfg, steps)?;
    TimeSeries::new(traj, dt, 0.0)
}

/// Exact sampled solution of `dz/dt = alpha z` in the complex plane,
/// returned as a 2-column (Re, Im) series. No integration error.
pub fn simulate_linear_complex(
    alpha: (f64, f64),
    z0: (f64, f64),
    dt: f64,
    steps: usize,
) -> Result<TimeSeries> {
    let (ar, ai) = alpha;
    let mut values = Mat::zeros(steps + 1, 2);
    for k in 0..=steps {
        let t = k as f64 * dt;
        // z_t = z0 * e^{alpha t}
        let scale = (ar * t).exp();
        let (s, c) = (ai * t).sin_cos();
        values.set(k, 0, scale * (z0.0 * c - z0.1 * s));
        values.set(k, 1, scale * (z0.0 * s + z0.1 * c));
    }
    TimeSeries::new(values, dt, 0.0)
}

/// Pointwise application of an observation operator; dt preserved.
pub fn observe(series: &TimeSeries, op: &ObservationOperator) -> Result<TimeSeries> {
    let d = series.dim();
    let values = match op {
        ObservationOperator::ComponentSelection(idx) => {
            if let Some(&bad) = idx.iter().find(|&&i| i >= d) {
                return Err(Error::DimensionMismatch {
                    context: "component selection index",
                    expected: d,
                    got: bad,
                });
            }
            let mut out = Mat::zeros(series.len(), idx.len());
            for t in 0..series.len() {
                let row = series.values.row(t);
                for (j, &i) in idx.iter().enumerate() {
                    out.set(t, j, row[i]);
                }
            }
            out
        }
        ObservationOperator::RealPartOfComplex => {
            if d != 2 {
                return Err(Error::DimensionMismatch {
                    context: "real-part operator input",
                    expected: 2,
                    got: d,
                });
            }
            let col = series.values.column(0);
            Mat::from_vec(col.len(), 1, col)
        }
        ObservationOperator::LinearProjection(p) => {
            if p.cols() != d {
                return Err(Error::DimensionMismatch {
                    context: "projection matrix columns",
                    expected: d,
                    got: p.cols(),
                });
            }
            let mut out = Mat::zeros(series.len(), p.rows());
            for t in 0..series.len() {
                let row = series.values.row(t);
                for i in 0..p.rows() {
                    out.set(t, i, p.row(i).iter().zip(row).map(|(a, b)| a * b).sum());
                }
            }
            out
        }
    };
    TimeSeries::new(values, series.dt, series.start_time)
}

/// Mean + top principal components of a data matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PCAReduction {
    pub mean: Vec<f64>,
    /// n_components × original-dim, orthonormal rows.
    pub components: Mat,
    /// Fraction of total variance per retained component, non-increasing.
    pub explained_variance: Vec<f64>,
}

pub fn pca_fit(data: &Mat, n_components: usize) -> Result<PCAReduction> {
    let (rows, cols) = (data.rows(), data.cols());
    if n_components == 0 || n_components > rows.min(cols) {
        return Err(Error::invalid(format!(
            "n_components must be in 1..={}, got {n_components}",
            rows.min(cols)
        )));
    }
    let mean: Vec<f64> = (0..cols)
        .map(|j| data.column(j).iter().sum::<f64>() / rows as f64)
        .collect();
    let mut centered = nalgebra::DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            centered[(i, j)] = data.get(i, j) - mean[j];
        }
    }
    let total_var: f64 = centered.iter().map(|v| v * v).sum();
    if total_var <= 0.0 {
        return Err(Error::invalid("degenerate data: zero variance"));
    }
    let svd = centered.svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::invalid("SVD failed to produce singular vectors"))?;
    let mut components = Mat::zeros(n_components, cols);
    let mut explained = Vec::with_capacity(n_components);
    for k in 0..n_components {
        for j in 0..cols {
            components.set(k, j, v_t[(k, j)]);
        }
        let s = svd.singular_values[k];
        explained.push(s * s / total_var);
    }
    Ok(PCAReduction {
        mean,
        components,
        explained_variance: explained,
    })
}

/// Project rows of `data` onto the retained components.
pub fn pca_transform(pca: &PCAReduction, data: &Mat) -> Result<Mat> {
    if data.cols() != pca.mean.len() {
        return Err(Error::DimensionMismatch {
            context: "pca_transform input columns",
            expected: pca.mean.len(),
            got: data.cols(),
        });
    }
    let k = pca.components.rows();
    let mut out = Mat::zeros(data.rows(), k);
    for t in 0..data.rows() {
        let row = data.row(t);
        for c in 0..k {
            let comp = pca.components.row(c);
            out.set(
                t,
                c,
                row.iter()
                    .zip(&pca.mean)
                    .zip(comp)
                    .map(|((x, m), w)| (x - m) * w)
                    .sum(),
            );
        }
    }
    Ok(out)
}

/// Reconstruct from component scores back to the original space.
pub fn pca_inverse(pca: &PCAReduction, scores: &Mat) -> Result<Mat> {
    if scores.cols() != pca.components.rows() {
        return Err(Error::DimensionMismatch {
            context: "pca_inverse score columns",
            expected: pca.components.rows(),
            got: scores.cols(),
        });
    }
    let dim = pca.mean.len();
    let mut out = Mat::zeros(scores.rows(), dim);
    for t in 0..scores.rows() {
        let s = scores.row(t);
        let row = out.row_mut(t);
        row.copy_from_slice(&pca.mean);
        for c in 0..pca.components.rows() {
            let comp = pca.components.row(c);
            for j in 0..dim {
                row[j] += s[c] * comp[j];
            }
        }
    }
    Ok(out)
}

/// Add i.i.d. Gaussian noise; deterministic per seed.
pub fn add_observation_noise(series: &TimeSeries, sigma: f64, seed: u64) -> Result<TimeSeries> {
    if sigma < 0.0 {
        return Err(Error::invalid("noise sigma must be >= 0"));
    }
    if sigma == 0.0 {
        return Ok(series.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = series.values.clone();
    for v in values.data_mut() {
        let e: f64 = rng.sample(StandardNormal);
        *v += sigma * e;
    }
    TimeSeries::new(values, series.dt, series.start_time)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::std_dev;

    #[test]
    fn lorenz_axis_is_invariant_manifold() {
        // on the z3-axis the field reduces to dz3/dt = -beta z3
        let ts = simulate_lorenz63([0.0, 0.0, 5.0], 0.01, 500, Lorenz63Params::default(), 1)
            .unwrap();
        for t in 0..ts.len() {
            let row = ts.values.row(t);
            assert!(row[0].abs() < 1e-12 && row[1].abs() < 1e-12);
        }
        assert!(ts.values.get(500, 2) < 5.0 * (-8.0 / 3.0 * 4.0f64).exp() * 1.01);
    }

    #[test]
    fn lorenz_fine_step_agreement() {
        let coarse =
            simulate_lorenz63([1.0, 1.0, 1.0], 0.01, 100, Lorenz63Params::default(), 1).unwrap();
        let fine =
            simulate_lorenz63([1.0, 1.0, 1.0], 0.01, 100, Lorenz63Params::default(), 100).unwrap();
        for t in 0..=100 {
            for j in 0..3 {
                assert!(
                    (coarse.values.get(t, j) - fine.values.get(t, j)).abs() <= 5e-3,
                    "disagreement at t={t}"
                );
            }
        }
    }

    #[test]
    fn lorenz_stays_bounded() {
        let ts = simulate_lorenz63([1.0, 1.0, 1.0], 0.01, 10_000, Lorenz63Params::default(), 1)
            .unwrap();
        let max = ts.values.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max < 60.0, "max coordinate {max}");
    }

    #[test]
    fn lorenz_field_gradients_match_finite_differences() {
        use crate::num_core::fd;
        let f = Lorenz63Field::classic();
        let z = [1.3, -2.1, 17.0];
        let j = crate::num_core::jacobian_at(&f, &z);
        let j_fd = fd::jacobian_fd(&f, &z, 1e-5);
        for i in 0..3 {
            for k in 0..3 {
                assert!((j.get(i, k) - j_fd.get(i, k)).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn linear_complex_matches_closed_form() {
        let ts = simulate_linear_complex((-0.1, -0.5), (0.5, 0.0), 0.1, 10).unwrap();
        // t = 1.0: z = 0.5 e^{-0.1} (cos(-0.5) + i sin(-0.5))
        let re = 0.5 * (-0.1f64).exp() * (-0.5f64).cos();
        let im = 0.5 * (-0.1f64).exp() * (-0.5f64).sin();
        assert!((ts.values.get(10, 0) - re).abs() < 1e-12);
        assert!((ts.values.get(10, 1) - im).abs() < 1e-12);
        assert!((re - 0.39700).abs() < 1e-4);
        assert!((im + 0.21685).abs() < 1e-4);
    }

    #[test]
    fn linear_complex_alpha_zero_is_constant() {
        let ts = simulate_linear_complex((0.0, 0.0), (0.3, -0.7), 0.05, 20).unwrap();
        for t in 0..ts.len() {
            assert_eq!(ts.values.row(t), &[0.3, -0.7]);
        }
    }

    #[test]
    fn linear_complex_modulus_decreases_for_negative_real_part() {
        let ts = simulate_linear_complex((-0.1, -0.5), (0.5, 0.0), 0.1, 100).unwrap();
        let mut prev = f64::INFINITY;
        for t in 0..ts.len() {
            let r = ts.values.row(t);
            let modulus = (r[0] * r[0] + r[1] * r[1]).sqrt();
            assert!(modulus < prev);
            prev = modulus;
        }
    }

    #[test]
    fn linear_complex_group_property() {
        // sampling at t then advancing s equals sampling at t+s
        let a = (-0.1, -0.5);
        let full = simulate_linear_complex(a, (0.5, 0.0), 0.1, 20).unwrap();
        let z5 = (full.values.get(5, 0), full.values.get(5, 1));
        let cont = simulate_linear_complex(a, z5, 0.1, 15).unwrap();
        for k in 0..=15 {
            assert!((cont.values.get(k, 0) - full.values.get(5 + k, 0)).abs() < 1e-12);
            assert!((cont.values.get(k, 1) - full.values.get(5 + k, 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn observe_identity_selection_is_identity() {
        let ts = simulate_lorenz63([1.0, 1.0, 1.0], 0.01, 50, Lorenz63Params::default(), 1)
            .unwrap();
        let op = ObservationOperator::ComponentSelection(vec![0, 1, 2]);
        let out = observe(&ts, &op).unwrap();
        assert_eq!(out.values, ts.values);
        // idempotence
        let out2 = observe(&out, &op).unwrap();
        assert_eq!(out2.values, ts.values);
    }

    #[test]
    fn observe_selects_first_component() {
        let ts = simulate_lorenz63([1.0, 1.0, 1.0], 0.01, 50, Lorenz63Params::default(), 1)
            .unwrap();
        let out = observe(&ts, &ObservationOperator::ComponentSelection(vec![0])).unwrap();
        assert_eq!(out.dim(), 1);
        assert_eq!(out.values.column(0), ts.values.column(0));
    }

    #[test]
    fn observe_real_part() {
        let ts = simulate_linear_complex((-0.1, -0.5), (0.5, 0.0), 0.1, 30).unwrap();
        let out = observe(&ts, &ObservationOperator::RealPartOfComplex).unwrap();
        assert_eq!(out.values.column(0), ts.values.column(0));
    }

    #[test]
    fn pca_exact_on_low_rank_data() {
        // two fixed spatial patterns with time-varying weights
        let dim = 12;
        let p1: Vec<f64> = (0..dim).map(|j| (j as f64 * 0.7).sin()).collect();
        let p2: Vec<f64> = (0..dim).map(|j| (j as f64 * 1.3).cos()).collect();
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|t| {
                let (a, b) = ((t as f64 * 0.1).sin(), (t as f64 * 0.23).cos());
                (0..dim).map(|j| a * p1[j] + b * p2[j]).collect()
            })
            .collect();
        let data = Mat::from_rows(&rows);
        let pca = pca_fit(&data, 2).unwrap();
        let scores = pca_transform(&pca, &data).unwrap();
        let back = pca_inverse(&pca, &scores).unwrap();
        for i in 0..data.rows() {
            for j in 0..dim {
                assert!((back.get(i, j) - data.get(i, j)).abs() < 1e-8);
            }
        }
        assert!(pca.explained_variance.iter().sum::<f64>() >= 0.99);
    }

    #[test]
    fn pca_components_orthonormal_and_variance_sorted() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let data = Mat::from_rows(&rows);
        let pca = pca_fit(&data, 4).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let dot: f64 = pca
                    .components
                    .row(a)
                    .iter()
                    .zip(pca.components.row(b))
                    .map(|(x, y)| x * y)
                    .sum();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-10);
            }
        }
        for w in pca.explained_variance.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn pca_isotropic_cloud_splits_variance_evenly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let dim = 4;
        let rows: Vec<Vec<f64>> = (0..20_000)
            .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let data = Mat::from_rows(&rows);
        let pca = pca_fit(&data, dim).unwrap();
        for &v in &pca.explained_variance {
            assert!((v - 1.0 / dim as f64).abs() < 0.03, "fraction {v}");
        }
    }

    #[test]
    fn pca_rejects_degenerate_data() {
        let data = Mat::zeros(10, 3);
        assert!(pca_fit(&data, 2).is_err());
    }

    #[test]
    fn noise_is_deterministic_and_well_scaled() {
        let ts = TimeSeries::new(Mat::zeros(100_000, 1), 0.1, 0.0).unwrap();
        let a = add_observation_noise(&ts, 1.0, 42).unwrap();
        let b = add_observation_noise(&ts, 1.0, 42).unwrap();
        assert_eq!(a.values, b.values);
        let sd = std_dev(a.values.data());
        assert!((0.99..=1.01).contains(&sd), "std {sd}");
        let clean = add_observation_noise(&ts, 0.0, 42).unwrap();
        assert_eq!(clean.values, ts.values);
    }
}
