//! Project-wide CSV time-series format.
//!
//! Header `t,x1,...,xn`, one row per sample, decimal point, UTF-8, LF line
//! endings. Floats are written with Rust's shortest round-trip formatting:
//! values survive write → read → write byte-identically, and writing the
//! same series twice always produces identical bytes. (The time column is
//! reconstructed from the first two rows on read, so re-serialized times
//! can differ in the last ulp when `dt` is not exactly representable.)
//! Readers reject non-uniform time columns (tolerance `1e-9 * dt`).
//!
//! An optional trailing `mask` column (0/1) marks rows whose observations
//! are missing (0 = masked); it is used by forecasting on partial data.

use crate::dynamics::TimeSeries;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use std::fmt::Write as _;
use std::path::Path;

/// Serialize a series to CSV text.
pub fn series_to_csv(series: &TimeSeries) -> String {
    let mut out = String::new();
    out.push('t');
    for j in 1..=series.dim() {
        let _ = write!(out, ",x{j}");
    }
    out.push('\n');
    for i in 0..series.len() {
        let _ = write!(out, "{}", series.time(i));
        for v in series.values.row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// A parsed series plus the optional per-row observation mask
/// (`true` = observed).
pub struct CsvSeries {
    pub series: TimeSeries,
    pub mask: Option<Vec<bool>>,
}

/// Parse the project CSV format.
pub fn series_from_csv(text: &str) -> Result<CsvSeries> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Csv("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") {
        return Err(Error::Csv(format!(
            "expected header starting with 't', got '{header}'"
        )));
    }
    let has_mask = cols.last() == Some(&"mask");
    let n = cols.len() - 1 - usize::from(has_mask);
    if n == 0 {
        return Err(Error::Csv("no value columns".into()));
    }
    for (j, c) in cols[1..1 + n].iter().enumerate() {
        let expect = format!("x{}", j + 1);
        if *c != expect {
            return Err(Error::Csv(format!(
                "expected column '{expect}', got '{c}'"
            )));
        }
    }

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut mask = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Csv(format!(
                "row {}: expected {} fields, got {}",
                lineno + 2,
                cols.len(),
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Csv(format!("row {}: bad number '{s}'", lineno + 2)))
        };
        times.push(parse(fields[0])?);
        for f in &fields[1..1 + n] {
            values.push(parse(f)?);
        }
        if has_mask {
            mask.push(parse(fields[cols.len() - 1])? != 0.0);
        }
    }
    if times.is_empty() {
        return Err(Error::Csv("no data rows".into()));
    }
    let rows = times.len();
    let (dt, start_time) = if rows == 1 {
        (1.0, times[0])
    } else {
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::Csv("time column must be strictly increasing".into()));
        }
        let tol = 1e-9 * dt;
        for (i, &t) in times.iter().enumerate() {
            let expect = times[0] + i as f64 * dt;
            if (t - expect).abs() > tol {
                return Err(Error::Csv(format!(
                    "non-uniform time column at row {}: {t} vs expected {expect}",
                    i + 2
                )));
            }
        }
        (dt, times[0])
    };
    Ok(CsvSeries {
        series: TimeSeries::new(Mat::from_vec(rows, n, values), dt, start_time)?,
        mask: if has_mask { Some(mask) } else { None },
    })
}

pub fn write_series(path: &Path, series: &TimeSeries) -> Result<()> {
    write_atomic(path, series_to_csv(series).as_bytes())
}

pub fn read_series(path: &Path) -> Result<CsvSeries> {
    let text = std::fs::read_to_string(path)?;
    series_from_csv(&text)
}

/// Write via a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
