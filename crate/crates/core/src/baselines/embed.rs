//! Takens delay embedding of a scalar series.

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Delay coordinates of a scalar series: row m is
/// `[x_m, x_{m-tau}, ..., x_{m-(d_E-1) tau}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayEmbedding {
    pub tau: usize,
    pub d_e: usize,
    /// M × d_E with M = T - (d_E - 1) tau.
    pub data: Mat,
}

pub fn delay_embed(series: &TimeSeries, tau: usize, d_e: usize) -> Result<DelayEmbedding> {
    if series.dim() != 1 {
        return Err(Error::DimensionMismatch {
            context: "delay_embed input columns",
            expected: 1,
            got: series.dim(),
        });
    }
    if tau == 0 || d_e == 0 {
        return Err(Error::invalid("tau and d_E must be >= 1"));
    }
    let t_len = series.len();
    let span = (d_e - 1) * tau;
    if t_len <= span {
        return Err(Error::SeriesTooShort {
            needed: span + 1,
            have: t_len,
        });
    }
    let x = series.values.column(0);
    let m = t_len - span;
    let mut data = Mat::zeros(m, d_e);
    for row in 0..m {
        let t = span + row; // earliest usable index is (d_E - 1) tau
        for k in 0..d_e {
            data.set(row, k, x[t - k * tau]);
        }
    }
    Ok(DelayEmbedding { tau, d_e, data })
}
