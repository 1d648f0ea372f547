//! Horizon-resolved forecast error over many start points.

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Per-step RMSE aggregated over trials, with diverged trials counted and
/// excluded from the averages.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastReport {
    pub horizon: usize,
    /// rmse[h] is the error h+1 sampling steps ahead.
    pub rmse: Vec<f64>,
    pub trials: usize,
    pub diverged: usize,
}

/// Score a forecaster against reference data.
///
/// For each start index `s` the callback must return a `horizon x ncols`
/// matrix whose row h predicts `truth[s + h + 1]` (first `ncols` columns).
/// A callback error or a non-finite prediction marks that trial as
/// diverged.
pub fn forecast_rmse<F>(
    truth: &TimeSeries,
    starts: &[usize],
    horizon: usize,
    ncols: usize,
    mut predict: F,
) -> Result<ForecastReport>
where
    F: FnMut(usize) -> Result<Mat>,
{
    if horizon == 0 || ncols == 0 || ncols > truth.dim() {
        return Err(Error::invalid(format!(
            "need horizon >= 1 and 1 <= ncols <= {}, got horizon {horizon}, ncols {ncols}",
            truth.dim()
        )));
    }
    if starts.is_empty() {
        return Err(Error::invalid("no start indices"));
    }
    if let Some(&bad) = starts.iter().find(|&&s| s + horizon >= truth.len()) {
        return Err(Error::invalid(format!(
            "start {bad} + horizon {horizon} runs past the series (len {})",
            truth.len()
        )));
    }

    let mut sq = vec![0.0; horizon];
    let mut diverged = 0usize;
    for &s in starts {
        let pred = match predict(s) {
            Ok(p) => p,
            Err(
                Error::IntegrationDiverged { .. } | Error::OptimizationDiverged { .. },
            ) => {
                diverged += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        if pred.rows() != horizon || pred.cols() < ncols {
            return Err(Error::DimensionMismatch {
                context: "forecast shape",
                expected: horizon,
                got: pred.rows(),
            });
        }
        if !pred.is_finite() {
            diverged += 1;
            continue;
        }
        for h in 0..horizon {
            for c in 0..ncols {
                let e = pred.get(h, c) - truth.values.get(s + h + 1, c);
                sq[h] += e * e;
            }
        }
    }
    let ok = starts.len() - diverged;
    if ok == 0 {
        return Err(Error::invalid("every forecast trial diverged"));
    }
    let rmse = sq
        .iter()
        .map(|s| (s / (ok * ncols) as f64).sqrt())
        .collect();
    Ok(ForecastReport {
        horizon,
        rmse,
        trials: starts.len(),
        diverged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> TimeSeries {
        let vals: Vec<f64> = (0..2 * n).map(|i| (i / 2) as f64).collect();
        TimeSeries::new(Mat::from_vec(n, 2, vals), 0.5, 0.0).unwrap()
    }

    #[test]
    fn perfect_forecaster_scores_zero() {
        let ts = ramp(30);
        let rep = forecast_rmse(&ts, &[0, 5, 10], 4, 2, |s| {
            Ok(ts.values.slice_rows(s + 1, s + 5))
        })
        .unwrap();
        assert_eq!(rep.rmse, vec![0.0; 4]);
        assert_eq!(rep.diverged, 0);
    }

    #[test]
    fn constant_offset_gives_the_offset_as_rmse() {
        let ts = ramp(30);
        let rep = forecast_rmse(&ts, &[2, 8], 3, 2, |s| {
            let mut m = ts.values.slice_rows(s + 1, s + 4);
            for v in m.data_mut() {
                *v += 0.25;
            }
            Ok(m)
        })
        .unwrap();
        for r in rep.rmse {
            assert!((r - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn diverged_trials_are_counted_and_excluded() {
        let ts = ramp(30);
        let rep = forecast_rmse(&ts, &[0, 5, 10], 2, 2, |s| {
            if s == 5 {
                Err(Error::IntegrationDiverged { step: 1 })
            } else {
                Ok(ts.values.slice_rows(s + 1, s + 3))
            }
        })
        .unwrap();
        assert_eq!(rep.diverged, 1);
        assert_eq!(rep.rmse, vec![0.0, 0.0]);
    }

    #[test]
    fn start_past_the_end_is_rejected() {
        let ts = ramp(10);
        assert!(forecast_rmse(&ts, &[8], 3, 2, |_| Ok(Mat::zeros(3, 2))).is_err());
    }
}
