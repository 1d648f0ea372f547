//! Analog forecasting: iterated nearest-neighbor prediction in the
//! embedded space.

use crate::baselines::DelayEmbedding;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum AnalogRegression {
    /// Gaussian-kernel-weighted mean of the neighbor successors.
    LocallyConstant,
    /// Weighted local linear regression from predecessors to successors.
    LocallyLinear,
}

/// Predecessor/successor pairs of embedded states.
#[derive(Debug, Clone)]
pub struct AnalogCatalog {
    pub predecessors: Mat,
    pub successors: Mat,
    pub k: usize,
    pub regression: AnalogRegression,
}

impl AnalogCatalog {
    /// One-step-ahead pairs from consecutive rows of a delay embedding.
    pub fn from_embedding(emb: &DelayEmbedding, k: usize, regression: AnalogRegression) -> Result<Self> {
        let m = emb.data.rows();
        if m < 2 {
            return Err(Error::SeriesTooShort { needed: 2, have: m });
        }
        let catalog = AnalogCatalog {
            predecessors: emb.data.slice_rows(0, m - 1),
            successors: emb.data.slice_rows(1, m),
            k,
            regression,
        };
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn new(
        predecessors: Mat,
        successors: Mat,
        k: usize,
        regression: AnalogRegression,
    ) -> Result<Self> {
        if predecessors.rows() != successors.rows() {
            return Err(Error::DimensionMismatch {
                context: "analog catalog pair count",
                expected: predecessors.rows(),
                got: successors.rows(),
            });
        }
        let c = AnalogCatalog {
            predecessors,
            successors,
            k,
            regression,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.predecessors.rows() {
            return Err(Error::invalid(format!(
                "k must be in 1..={}, got {}",
                self.predecessors.rows(),
                self.k
            )));
        }
        Ok(())
    }

    /// Indices and distances of the k nearest predecessors (ascending;
    /// index order breaks distance ties).
    fn nearest(&self, query: &[f64]) -> Vec<(usize, f64)> {
        let mut all: Vec<(usize, f64)> = (0..self.predecessors.rows())
            .map(|i| (i, crate::linalg::dist2(self.predecessors.row(i), query)))
            .collect();
        let cmp = |a: &(usize, f64), b: &(usize, f64)| {
            a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0))
        };
        if self.k < all.len() {
            all.select_nth_unstable_by(self.k - 1, cmp);
            all.truncate(self.k);
        }
        all.sort_by(cmp);
        all
    }

    /// One-step prediction for an embedded query state.
    pub fn predict(&self, query: &[f64]) -> Result<Vec<f64>> {
        let d = self.predecessors.cols();
        if query.len() != d {
            return Err(Error::DimensionMismatch {
                context: "analog query",
                expected: d,
                got: query.len(),
            });
        }
        let neighbors = self.nearest(query);
        // Gaussian kernel with bandwidth = median neighbor distance
        let mut dists: Vec<f64> = neighbors.iter().map(|(_, d2)| d2.sqrt()).collect();
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let bw = dists[dists.len() / 2];
        let weights: Vec<f64> = if bw > 0.0 {
            neighbors.iter().map(|(_, d2)| (-d2 / (bw * bw)).exp()).collect()
        } else {
            vec![1.0; neighbors.len()]
        };
        let wsum: f64 = weights.iter().sum();

        match self.regression {
            AnalogRegression::LocallyConstant => {
                let mut out = vec![0.0; d];
                for ((idx, _), w) in neighbors.iter().zip(&weights) {
                    for (o, s) in out.iter_mut().zip(self.successors.row(*idx)) {
                        *o += w * s;
                    }
                }
                for o in &mut out {
                    *o /= wsum;
                }
                Ok(out)
            }
            AnalogRegression::LocallyLinear => {
                // weighted least squares successors ~ [1, predecessor]
                let k = neighbors.len();
                let p = d + 1;
                if k < p {
                    // not enough neighbors for a linear fit
                    let c = AnalogCatalog {
                        regression: AnalogRegression::LocallyConstant,
                        ..self.clone()
                    };
                    return c.predict(query);
                }
                let mut xw = DMatrix::zeros(k, p);
                let mut yw = DMatrix::zeros(k, d);
                for (r, ((idx, _), w)) in neighbors.iter().zip(&weights).enumerate() {
                    let sw = w.sqrt();
                    xw[(r, 0)] = sw;
                    for c in 0..d {
                        xw[(r, c + 1)] = sw * self.predecessors.get(*idx, c);
                        yw[(r, c)] = sw * self.successors.get(*idx, c);
                    }
                }
                let svd = xw.svd(true, true);
                let beta = svd
                    .solve(&yw, 1e-12)
                    .map_err(|e| Error::invalid(format!("local regression failed: {e}")))?;
                let mut out = vec![0.0; d];
                for c in 0..d {
                    out[c] = beta[(0, c)]
                        + (0..d).map(|j| beta[(j + 1, c)] * query[j]).sum::<f64>();
                }
                Ok(out)
            }
        }
    }
}

/// Iterated analog forecast: predict, feed back, repeat for `horizon`
/// steps. Row h is the embedded state h+1 steps ahead; its first coordinate
/// is the scalar forecast.
pub fn analog_forecast(catalog: &AnalogCatalog, query: &[f64], horizon: usize) -> Result<Mat> {
    let d = catalog.predecessors.cols();
    let mut out = Mat::zeros(horizon, d);
    let mut cur = query.to_vec();
    for h in 0..horizon {
        cur = catalog.predict(&cur)?;
        if !cur.iter().all(|v| v.is_finite()) {
            return Err(Error::IntegrationDiverged { step: h });
        }
        out.row_mut(h).copy_from_slice(&cur);
    }
    Ok(out)
}
