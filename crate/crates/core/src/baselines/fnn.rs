//! False-nearest-neighbors embedding dimension estimator.

use crate::baselines::delay_embed;
use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};
use crate::linalg::std_dev;

/// Fraction of false neighbors at one embedding dimension.
fn fnn_fraction(series: &TimeSeries, tau: usize, d: usize, rtol: f64, atol: f64) -> Result<f64> {
    let x = series.values.column(0);
    let sigma = std_dev(&x);
    let emb = delay_embed(series, tau, d)?;
    let span_next = d * tau; // first usable index at dimension d+1
    let m = emb.data.rows();
    // embedding rows at dimension d correspond to series index (d-1)tau + row;
    // the lifted coordinate for row r is x[(d-1)tau + r + ... ] shifted so that
    // the extra component is x[t - d tau] for t = row index in d+1 terms.
    // Work instead on the common index range where both embeddings exist.
    let offset = span_next - (d - 1) * tau; // rows to skip at dimension d
    let usable = m - offset;
    if usable < 2 {
        return Err(Error::SeriesTooShort {
            needed: span_next + 2,
            have: series.len(),
        });
    }
    let mut false_count = 0usize;
    let mut total = 0usize;
    for i in 0..usable {
        let ri = emb.data.row(i + offset);
        // nearest neighbor in d dimensions (exact search)
        let mut best = (usize::MAX, f64::INFINITY);
        for j in 0..usable {
            if j == i {
                continue;
            }
            let d2 = crate::linalg::dist2(ri, emb.data.row(j + offset));
            if d2 < best.1 {
                best = (j, d2);
            }
        }
        let (j, d2) = best;
        if d2 == 0.0 {
            continue;
        }
        let rd = d2.sqrt();
        // extra coordinate when lifting to d+1: x[t - d tau]
        let ti = span_next + i;
        let tj = span_next + j;
        let extra = (x[ti - d * tau] - x[tj - d * tau]).abs();
        let rd1 = (d2 + extra * extra).sqrt();
        if extra / rd > rtol || rd1 / sigma > atol {
            false_count += 1;
        }
        total += 1;
    }
    if total == 0 {
        return Err(Error::invalid("no valid neighbor pairs"));
    }
    Ok(false_count as f64 / total as f64)
}

/// False-neighbor fraction at each dimension `1..=max_dim`.
pub fn fnn_curve(
    series: &TimeSeries,
    tau: usize,
    max_dim: usize,
    rtol: f64,
    atol: f64,
) -> Result<Vec<f64>> {
    if series.dim() != 1 {
        return Err(Error::DimensionMismatch {
            context: "fnn input columns",
            expected: 1,
            got: series.dim(),
        });
    }
    if max_dim == 0 {
        return Err(Error::invalid("max_dim must be >= 1"));
    }
    (1..=max_dim)
        .map(|d| fnn_fraction(series, tau, d, rtol, atol))
        .collect()
}

/// Smallest embedding dimension whose false-neighbor fraction is below 1%.
///
/// `rtol` is the distance-growth threshold, `atol` the loneliness threshold
/// in units of the series standard deviation (classical values 10 and 2).
pub fn embedding_dim_fnn(
    series: &TimeSeries,
    tau: usize,
    max_dim: usize,
    rtol: f64,
    atol: f64,
) -> Result<usize> {
    let curve = fnn_curve(series, tau, max_dim, rtol, atol)?;
    for (i, frac) in curve.iter().enumerate() {
        if *frac < 0.01 {
            return Ok(i + 1);
        }
    }
    Err(Error::invalid(format!(
        "false-neighbor fraction still {:.3} at max_dim {max_dim}",
        curve.last().copied().unwrap_or(f64::NAN)
    )))
}
