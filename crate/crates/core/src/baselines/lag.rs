//! Lag selection for delay embeddings: mutual information and
//! autocorrelation criteria.

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};
use crate::linalg::std_dev;

/// Selected lag plus a warning flag when the selection rule had no clean
/// hit and fell back (argmin for MI, max_lag for autocorrelation).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LagEstimate {
    pub tau: usize,
    pub fallback: bool,
}

fn scalar_column(series: &TimeSeries) -> Result<Vec<f64>> {
    if series.dim() != 1 {
        return Err(Error::DimensionMismatch {
            context: "lag estimator input columns",
            expected: 1,
            got: series.dim(),
        });
    }
    Ok(series.values.column(0))
}

/// Histogram mutual information between `x_t` and `x_{t-tau}` with
/// equal-width bins over the sample range.
fn mutual_information(x: &[f64], tau: usize, bins: usize) -> f64 {
    let n = x.len() - tau;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in x {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let width = (hi - lo) / bins as f64;
    let bin = |v: f64| (((v - lo) / width) as usize).min(bins - 1);
    let mut joint = vec![0u32; bins * bins];
    let mut ma = vec![0u32; bins];
    let mut mb = vec![0u32; bins];
    for t in tau..x.len() {
        let (a, b) = (bin(x[t]), bin(x[t - tau]));
        joint[a * bins + b] += 1;
        ma[a] += 1;
        mb[b] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for a in 0..bins {
        for b in 0..bins {
            let c = joint[a * bins + b];
            if c == 0 {
                continue;
            }
            let p = c as f64 / nf;
            let pa = ma[a] as f64 / nf;
            let pb = mb[b] as f64 / nf;
            mi += p * (p / (pa * pb)).ln();
        }
    }
    mi
}

/// First local minimum of the lagged mutual information; falls back to the
/// global argmin (with the warning flag set) when no local minimum exists.
pub fn lag_by_mutual_information(
    series: &TimeSeries,
    max_lag: usize,
    bins: usize,
) -> Result<LagEstimate> {
    let x = scalar_column(series)?;
    if bins < 2 {
        return Err(Error::invalid("bins must be >= 2"));
    }
    if max_lag == 0 || max_lag >= x.len() / 2 {
        return Err(Error::invalid(format!(
            "max_lag must be in 1..{}, got {max_lag}",
            x.len() / 2
        )));
    }
    if std_dev(&x) == 0.0 {
        return Err(Error::invalid("constant series: mutual information undefined"));
    }
    let raw: Vec<f64> = (1..=max_lag + 1)
        .map(|tau| mutual_information(&x, tau, bins))
        .collect();
    // 5-point moving average: the histogram estimate jitters by a few
    // hundredths of a nat, enough to fake local minima on shallow curves
    let mi: Vec<f64> = (0..raw.len())
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(raw.len());
            raw[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    // first tau with MI(tau) < MI(tau-1) and MI(tau) <= MI(tau+1)
    for tau in 2..=max_lag {
        let (prev, cur, next) = (mi[tau - 2], mi[tau - 1], mi[tau]);
        if cur < prev && cur <= next {
            return Ok(LagEstimate { tau, fallback: false });
        }
    }
    let argmin = mi[..max_lag]
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i + 1)
        .unwrap();
    Ok(LagEstimate {
        tau: argmin,
        fallback: true,
    })
}

/// Sample autocorrelation at a given lag.
fn autocorrelation(x: &[f64], mean: f64, var: f64, tau: usize) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for t in tau..n {
        s += (x[t] - mean) * (x[t - tau] - mean);
    }
    s / (n as f64 * var)
}

/// First lag where the sample autocorrelation drops below 1/e; falls back
/// to `max_lag` (warning flag set) if it never does.
pub fn lag_by_autocorrelation(series: &TimeSeries, max_lag: usize) -> Result<LagEstimate> {
    let x = scalar_column(series)?;
    if max_lag == 0 || max_lag >= x.len() / 2 {
        return Err(Error::invalid(format!(
            "max_lag must be in 1..{}, got {max_lag}",
            x.len() / 2
        )));
    }
    let mean = crate::linalg::mean(&x);
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / x.len() as f64;
    if var == 0.0 {
        return Err(Error::invalid("constant series: autocorrelation undefined"));
    }
    let threshold = 1.0 / std::f64::consts::E;
    for tau in 1..=max_lag {
        if autocorrelation(&x, mean, var, tau) < threshold {
            return Ok(LagEstimate { tau, fallback: false });
        }
    }
    Ok(LagEstimate {
        tau: max_lag,
        fallback: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn series(vals: Vec<f64>) -> TimeSeries {
        TimeSeries::new(Mat::from_vec(vals.len(), 1, vals), 1.0, 0.0).unwrap()
    }

    #[test]
    fn sine_mi_minimum_near_quarter_period() {
        // ~100.7 samples per period (incommensurate with the sampling so
        // the phase fills in densely) plus a little measurement noise:
        // first MI minimum near lag 25
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vals: Vec<f64> = (0..8000)
            .map(|i| {
                (2.0 * std::f64::consts::PI * i as f64 / 100.7).sin()
                    + rng.gen_range(-0.05..0.05)
            })
            .collect();
        let est = lag_by_mutual_information(&series(vals), 60, 32).unwrap();
        assert!(!est.fallback);
        assert!((20..=30).contains(&est.tau), "tau {}", est.tau);
    }

    #[test]
    fn monotone_mi_decay_sets_the_fallback_flag() {
        // slow AR(1): MI still strictly decaying at max_lag = 4, so there
        // is no local minimum to pick
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut vals = vec![0.0f64; 50_000];
        for t in 1..vals.len() {
            vals[t] = 0.995 * vals[t - 1] + rng.gen_range(-1.0..1.0);
        }
        let est = lag_by_mutual_information(&series(vals), 4, 16).unwrap();
        assert!(est.fallback, "decaying MI has no interior minimum");
        assert_eq!(est.tau, 4);
    }

    #[test]
    fn constant_series_is_rejected() {
        let vals = vec![2.0; 1000];
        assert!(lag_by_mutual_information(&series(vals.clone()), 20, 16).is_err());
        assert!(lag_by_autocorrelation(&series(vals), 20).is_err());
    }

    #[test]
    fn white_noise_autocorrelation_lag_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let vals: Vec<f64> = (0..20_000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let est = lag_by_autocorrelation(&series(vals), 50).unwrap();
        assert_eq!(est.tau, 1);
        assert!(!est.fallback);
    }

    #[test]
    fn ar1_autocorrelation_lag_matches_analytic_decay() {
        // AR(1) with coefficient 0.9: autocorrelation 0.9^tau crosses 1/e
        // near tau = -1/ln 0.9 ~ 9.5
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut vals = vec![0.0f64; 200_000];
        for t in 1..vals.len() {
            vals[t] = 0.9 * vals[t - 1] + rng.gen_range(-1.0..1.0);
        }
        let est = lag_by_autocorrelation(&series(vals), 100).unwrap();
        assert!((8..=12).contains(&est.tau), "tau {}", est.tau);
    }

    #[test]
    fn lag_estimators_are_affine_invariant() {
        let vals: Vec<f64> = (0..6000)
            .map(|i| (i as f64 * 0.07).sin() + 0.5 * (i as f64 * 0.013).cos())
            .collect();
        let scaled: Vec<f64> = vals.iter().map(|v| 13.0 * v - 400.0).collect();
        let a = lag_by_mutual_information(&series(vals.clone()), 80, 32).unwrap();
        let b = lag_by_mutual_information(&series(scaled.clone()), 80, 32).unwrap();
        assert_eq!(a, b);
        let a = lag_by_autocorrelation(&series(vals), 80).unwrap();
        let b = lag_by_autocorrelation(&series(scaled), 80).unwrap();
        assert_eq!(a, b);
    }
}
