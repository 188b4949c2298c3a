//! Small sample diagnostics used by the Monte Carlo checks.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const MIN_DIAGNOSTIC_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

/// Sample mean, unbiased variance, and the plain moment ratios for skewness
/// and excess kurtosis.
pub fn moments(xs: &[f64]) -> Result<Moments> {
    if xs.len() < 2 {
        return Err(Error::Precondition("need at least two samples".into()));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    if m2 <= 0.0 || !m2.is_finite() {
        return Err(Error::Domain("sample variance is zero".into()));
    }
    Ok(Moments {
        mean,
        variance: m2 * n / (n - 1.0),
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
    })
}

/// Standard error of a sample mean.
pub fn std_error(xs: &[f64]) -> Result<f64> {
    let m = moments(xs)?;
    Ok((m.variance / xs.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalityReport {
    /// Kolmogorov-Smirnov distance to `N(0, σ²)`, `σ²` the sample variance.
    pub ks_statistic: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub samples: usize,
}

pub fn normality(xs: &[f64]) -> Result<NormalityReport> {
    if xs.len() < MIN_DIAGNOSTIC_SAMPLES {
        return Err(Error::Precondition(format!(
            "normality diagnostics need at least {MIN_DIAGNOSTIC_SAMPLES} samples, got {}",
            xs.len()
        )));
    }
    let m = moments(xs)?;
    let normal = Normal::new(0.0, m.variance.sqrt())
        .map_err(|e| Error::Domain(format!("fitted normal: {e}")))?;
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let ks = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = normal.cdf(x);
            (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
        })
        .fold(0.0, f64::max);
    Ok(NormalityReport {
        ks_statistic: ks,
        skewness: m.skewness,
        excess_kurtosis: m.excess_kurtosis,
        samples: xs.len(),
    })
}

/// Sample correlation of two equally long series.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Precondition("series lengths differ".into()));
    }
    let mx = moments(xs)?;
    let my = moments(ys)?;
    let n = xs.len() as f64;
    let c: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx.mean) * (y - my.mean)).sum::<f64>();
    Ok(c / (n - 1.0) / (mx.variance * my.variance).sqrt())
}
