//! The fourteen summary statistics computed over the output of every
//! feature transform.
//!
//! Conventions: population (N) denominators for the standard deviation and
//! central moments, excess kurtosis, and `skewness = kurtosis = 0` whenever
//! the second central moment falls below [`DEGENERATE_VARIANCE`]. Entropy and
//! uniformity are computed from the normalized occurrence counts of the
//! distinct values of the input, with a base-2 logarithm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_STATS: usize = 14;

/// Second central moment below which a vector is treated as constant.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Names of the statistics in canonical output order.
pub const STAT_NAMES: [&str; NUM_STATS] = [
    "area",
    "mean",
    "std",
    "skewness",
    "kurtosis",
    "energy",
    "entropy",
    "max",
    "mad",
    "median",
    "min",
    "range",
    "rms",
    "uniformity",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatVector {
    pub area: f64,
    pub mean: f64,
    pub std: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub energy: f64,
    pub entropy: f64,
    pub max: f64,
    /// Mean absolute deviation around the mean.
    pub mad: f64,
    pub median: f64,
    pub min: f64,
    pub range: f64,
    pub rms: f64,
    pub uniformity: f64,
}

impl StatVector {
    /// The statistics in canonical order (see [`STAT_NAMES`]).
    pub fn to_array(&self) -> [f64; NUM_STATS] {
        [
            self.area,
            self.mean,
            self.std,
            self.skewness,
            self.kurtosis,
            self.energy,
            self.entropy,
            self.max,
            self.mad,
            self.median,
            self.min,
            self.range,
            self.rms,
            self.uniformity,
        ]
    }
}

/// Compute all fourteen statistics of `p`.
///
/// Fails on an empty slice or on any non-finite entry.
pub fn compute_stats(p: &[f64]) -> Result<StatVector> {
    if p.is_empty() {
        return Err(Error::arg("statistics of an empty vector"));
    }
    if let Some(i) = p.iter().position(|v| !v.is_finite()) {
        return Err(Error::arg(format!("non-finite value at index {i}")));
    }

    let n = p.len() as f64;
    let area: f64 = p.iter().sum();
    let energy: f64 = p.iter().map(|v| v * v).sum();
    let mean = area / n;

    let (mut m2, mut m3, mut m4, mut abs_dev) = (0.0, 0.0, 0.0, 0.0);
    for &v in p {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        abs_dev += d.abs();
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;

    let (skewness, kurtosis) = if m2 < DEGENERATE_VARIANCE {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };

    let mut sorted = p.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let len = sorted.len();
    let min = sorted[0];
    let max = sorted[len - 1];
    let median = if len % 2 == 1 {
        sorted[len / 2]
    } else {
        0.5 * (sorted[len / 2 - 1] + sorted[len / 2])
    };

    let (entropy, uniformity) = distinct_value_entropy(&sorted);

    Ok(StatVector {
        area,
        mean,
        std: m2.sqrt(),
        skewness,
        kurtosis,
        energy,
        entropy,
        max,
        mad: abs_dev / n,
        median,
        min,
        range: max - min,
        rms: (energy / n).sqrt(),
        uniformity,
    })
}

/// Entropy (bits) and uniformity of the distinct-value frequency
/// distribution of an already sorted slice.
fn distinct_value_entropy(sorted: &[f64]) -> (f64, f64) {
    let n = sorted.len() as f64;
    let mut entropy = 0.0;
    let mut uniformity = 0.0;
    let mut start = 0;
    while start < sorted.len() {
        let value = sorted[start];
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == value {
            end += 1;
        }
        let freq = (end - start) as f64 / n;
        entropy -= freq * freq.log2();
        uniformity += freq * freq;
        start = end;
    }
    // A single distinct value gives -1·log2(1) = -0.0.
    (entropy.max(0.0), uniformity)
}

/// Convenience wrapper for integer-valued transform outputs.
pub fn compute_stats_u32(p: &[u32]) -> Result<StatVector> {
    let v: Vec<f64> = p.iter().map(|&x| x as f64).collect();
    compute_stats(&v)
}
