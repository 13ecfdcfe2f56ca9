//! Empirical distribution functions and summary statistics of latency and
//! jitter series.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("no samples")]
    Empty,
    #[error("percentile {0} outside (0, 100]")]
    PercentileRange(String),
}

/// Step function `F(x) = #{samples <= x} / n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ecdf {
    /// Distinct values, ascending.
    values: Vec<i64>,
    /// Number of samples `<=` the value at the same index.
    cumulative: Vec<u64>,
}

pub fn build_ecdf(samples: &[i64]) -> Result<Ecdf, AnalysisError> {
    if samples.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let mut values = Vec::new();
    let mut cumulative = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        if values.last() == Some(v) {
            *cumulative.last_mut().expect("parallel vectors") = i as u64 + 1;
        } else {
            values.push(*v);
            cumulative.push(i as u64 + 1);
        }
    }
    Ok(Ecdf { values, cumulative })
}

impl Ecdf {
    pub fn len(&self) -> u64 {
        *self.cumulative.last().expect("non-empty by construction")
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> i64 {
        self.values[0]
    }

    pub fn max(&self) -> i64 {
        *self.values.last().expect("non-empty by construction")
    }

    /// `F(x)`; accepts fractional arguments.
    pub fn fraction_at(&self, x: f64) -> f64 {
        let k = self.values.partition_point(|&v| (v as f64) <= x);
        if k == 0 {
            0.0
        } else {
            self.cumulative[k - 1] as f64 / self.len() as f64
        }
    }

    /// Distinct values with their cumulative fractions.
    pub fn points(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let n = self.len() as f64;
        self.values
            .iter()
            .zip(&self.cumulative)
            .map(move |(&v, &c)| (v, c as f64 / n))
    }

    /// Smallest sample `x` with `F(x) >= p/100`.
    pub fn percentile(&self, p: f64) -> Result<i64, AnalysisError> {
        if !(p > 0.0 && p <= 100.0) {
            return Err(AnalysisError::PercentileRange(p.to_string()));
        }
        // Compare `c * 100` with `p * n` so exact ranks do not round.
        let n = self.len() as f64;
        let k = self.cumulative.partition_point(|&c| (c as f64) * 100.0 < p * n);
        Ok(self.values[k.min(self.values.len() - 1)])
    }

    /// Two-column CSV `value_ns,cum_fraction`, one row per distinct value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value_ns,cum_fraction\n");
        for (v, f) in self.points() {
            let _ = writeln!(out, "{v},{f}");
        }
        out
    }
}

pub fn percentile(e: &Ecdf, p: f64) -> Result<i64, AnalysisError> {
    e.percentile(p)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesStats {
    pub count: u64,
    pub min: i64,
    pub max: i64,
    pub mean: f64,
    pub p50: i64,
    pub p95: i64,
    pub p99: i64,
    /// Samples strictly above `p99`.
    pub outliers: u64,
}

pub fn series_stats(samples: &[i64]) -> Result<SeriesStats, AnalysisError> {
    let e = build_ecdf(samples)?;
    let p99 = e.percentile(99.0)?;
    let sum: i128 = samples.iter().map(|&s| i128::from(s)).sum();
    Ok(SeriesStats {
        count: e.len(),
        min: e.min(),
        max: e.max(),
        mean: sum as f64 / samples.len() as f64,
        p50: e.percentile(50.0)?,
        p95: e.percentile(95.0)?,
        p99,
        outliers: samples.iter().filter(|&&s| s > p99).count() as u64,
    })
}
