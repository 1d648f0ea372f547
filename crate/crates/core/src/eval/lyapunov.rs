//! Largest Lyapunov exponent from a trajectory, via the mean divergence
//! of nearest-neighbor pairs (Rosenstein's method).

use crate::error::{Error, Result};
use crate::linalg::{dist2, linear_fit, mean, Mat};
use rustfft::{num_complex::Complex, FftPlanner};

/// Mean period of a scalar signal in samples, from the power-weighted mean
/// frequency of its spectrum.
pub fn mean_period(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 4 {
        return Err(Error::SeriesTooShort { needed: 4, have: n });
    }
    let mu = mean(x);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - mu, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut wsum = 0.0;
    let mut psum = 0.0;
    for (k, c) in buf.iter().enumerate().take(n / 2).skip(1) {
        let p = c.norm_sqr();
        wsum += (k as f64 / n as f64) * p;
        psum += p;
    }
    if psum == 0.0 || wsum == 0.0 {
        return Err(Error::invalid("signal has no spectral content"));
    }
    Ok(psum / wsum)
}

#[derive(Debug, Clone, Copy)]
pub struct LyapunovConfig {
    /// Minimum temporal separation between a point and its neighbor.
    pub theiler: usize,
    /// Number of steps each neighbor pair is tracked.
    pub max_steps: usize,
    /// Fit window as fractions of the curve length. The leading part of
    /// the curve is a transient (neighbors re-orienting along the unstable
    /// direction), so the fit starts after it by default.
    pub fit_start: f64,
    pub fit_end: f64,
    /// Use every `ref_stride`-th point as a reference (1 = all).
    pub ref_stride: usize,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            theiler: 10,
            max_steps: 300,
            fit_start: 0.2,
            fit_end: 0.8,
            ref_stride: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LyapunovEstimate {
    /// Slope of the mean log-divergence curve, per unit time.
    pub lambda: f64,
    /// Mean log divergence at each tracking step.
    pub curve: Vec<f64>,
    /// Curve index range used for the slope fit.
    pub fit_range: (usize, usize),
    pub pairs: usize,
}

/// Fit the exponent to an existing divergence curve: least-squares slope
/// over the `[start, end]` fraction window of the curve against time.
pub fn fit_divergence_slope(
    curve: &[f64],
    dt: f64,
    start: f64,
    end: f64,
) -> Result<(f64, (usize, usize))> {
    if !(0.0..1.0).contains(&start) || !(0.0..=1.0).contains(&end) || start >= end {
        return Err(Error::invalid("need 0 <= start < end <= 1 for the fit window"));
    }
    let n = curve.len();
    let lo = (n as f64 * start).round() as usize;
    let hi = ((n as f64 * end).round() as usize).clamp(lo + 2, n);
    let t: Vec<f64> = (lo..hi).map(|k| k as f64 * dt).collect();
    let (slope, _) = linear_fit(&t, &curve[lo..hi]);
    Ok((slope, (lo, hi)))
}

/// Largest Lyapunov exponent of a (possibly embedded) trajectory sampled
/// every `dt`.
///
/// Each reference point is paired with its nearest neighbor outside the
/// Theiler window; the pair's log distance is tracked for `max_steps` and
/// the exponent is the initial slope of the mean curve.
pub fn largest_lyapunov(data: &Mat, dt: f64, cfg: &LyapunovConfig) -> Result<LyapunovEstimate> {
    if dt <= 0.0 || cfg.ref_stride == 0 {
        return Err(Error::invalid("dt and ref_stride must be positive"));
    }
    let m = data.rows();
    let steps = cfg.max_steps;
    if m <= steps + cfg.theiler + 1 {
        return Err(Error::SeriesTooShort {
            needed: steps + cfg.theiler + 2,
            have: m,
        });
    }
    let last = m - steps; // pairs must stay trackable for `steps` steps
    let mut log_sum = vec![0.0; steps + 1];
    let mut counts = vec![0usize; steps + 1];
    let mut pairs = 0usize;
    for i in (0..last).step_by(cfg.ref_stride) {
        let ri = data.row(i);
        let mut best = (usize::MAX, f64::INFINITY);
        for j in 0..last {
            if i.abs_diff(j) <= cfg.theiler {
                continue;
            }
            let d2 = dist2(ri, data.row(j));
            if d2 < best.1 {
                best = (j, d2);
            }
        }
        let (j, d2) = best;
        if j == usize::MAX || d2 == 0.0 {
            continue;
        }
        pairs += 1;
        for (k, (ls, cnt)) in log_sum.iter_mut().zip(&mut counts).enumerate() {
            let dk2 = dist2(data.row(i + k), data.row(j + k));
            if dk2 > 0.0 {
                *ls += 0.5 * dk2.ln();
                *cnt += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::invalid("no usable neighbor pairs"));
    }
    let curve: Vec<f64> = log_sum
        .iter()
        .zip(&counts)
        .map(|(s, c)| if *c > 0 { s / *c as f64 } else { f64::NAN })
        .collect();
    if curve.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("divergence curve has empty steps"));
    }
    let (lambda, fit_range) = fit_divergence_slope(&curve, dt, cfg.fit_start, cfg.fit_end)?;
    Ok(LyapunovEstimate {
        lambda,
        curve,
        fit_range,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate_lorenz63, Lorenz63Params};

    #[test]
    fn mean_period_of_a_sine_is_its_period() {
        let x: Vec<f64> = (0..4096)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 64.0).sin())
            .collect();
        let p = mean_period(&x).unwrap();
        assert!((p - 64.0).abs() < 1.0, "period {p}");
    }

    #[test]
    fn slope_fit_recovers_a_synthetic_exponent() {
        // curve ln d(t) = -3 + 1.0 t sampled at dt = 0.02, exponent 1.0
        let dt = 0.02;
        let curve: Vec<f64> = (0..500).map(|k| -3.0 + k as f64 * dt).collect();
        let (slope, (lo, hi)) = fit_divergence_slope(&curve, dt, 0.2, 0.8).unwrap();
        assert_eq!((lo, hi), (100, 400));
        assert!((slope - 1.0).abs() < 0.05, "slope {slope}");
        assert!(fit_divergence_slope(&curve, dt, 0.8, 0.2).is_err());
    }

    #[test]
    fn lorenz_exponent_matches_the_literature_value() {
        let ts = simulate_lorenz63([1.0, 3.0, 25.0], 0.01, 13_000, Lorenz63Params::default(), 2)
            .unwrap();
        // drop the transient
        let data = ts.values.slice_rows(3_000, ts.len());
        let theiler = mean_period(&data.column(0)).unwrap().round() as usize;
        let cfg = LyapunovConfig {
            theiler,
            ref_stride: 5,
            ..Default::default()
        };
        let est = largest_lyapunov(&data, 0.01, &cfg).unwrap();
        assert!(
            (est.lambda - 0.91).abs() < 0.15,
            "lambda {} (pairs {})",
            est.lambda,
            est.pairs
        );
    }

    #[test]
    fn periodic_orbit_has_near_zero_exponent() {
        let rows: Vec<Vec<f64>> = (0..4000)
            .map(|i| {
                let t = i as f64 * 0.05;
                vec![t.sin(), t.cos()]
            })
            .collect();
        let cfg = LyapunovConfig {
            theiler: 126, // one period
            max_steps: 200,
            ref_stride: 4,
            ..Default::default()
        };
        let est = largest_lyapunov(&Mat::from_rows(&rows), 0.05, &cfg).unwrap();
        assert!(est.lambda.abs() < 0.05, "lambda {}", est.lambda);
    }

    #[test]
    fn exponent_is_invariant_under_positive_scaling() {
        let ts = simulate_lorenz63([1.0, 3.0, 25.0], 0.01, 5_000, Lorenz63Params::default(), 2)
            .unwrap();
        let data = ts.values.slice_rows(1_000, ts.len());
        let mut scaled = data.clone();
        for v in scaled.data_mut() {
            *v *= 17.0;
        }
        let cfg = LyapunovConfig {
            theiler: 100,
            max_steps: 200,
            ref_stride: 8,
            ..Default::default()
        };
        let a = largest_lyapunov(&data, 0.01, &cfg).unwrap();
        let b = largest_lyapunov(&scaled, 0.01, &cfg).unwrap();
        assert!((a.lambda - b.lambda).abs() < 1e-9);
    }
}
