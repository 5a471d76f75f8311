//! Summary statistics used by the reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Boxplot summary: whiskers at `Q1 - 1.5 IQR` and `Q3 + 1.5 IQR`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub lower_whisker: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub upper_whisker: f64,
    pub min: f64,
    pub max: f64,
}

impl BoxStats {
    /// Works on a sorted copy, so the result does not depend on input order.
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        if xs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        let (q1, median, q3) = (
            quantile_sorted(&s, 0.25),
            quantile_sorted(&s, 0.5),
            quantile_sorted(&s, 0.75),
        );
        let iqr = q3 - q1;
        Ok(Self {
            count: s.len(),
            mean: mean(&s),
            std: std_dev(&s),
            lower_whisker: q1 - 1.5 * iqr,
            q1,
            median,
            q3,
            upper_whisker: q3 + 1.5 * iqr,
            min: s[0],
            max: s[s.len() - 1],
        })
    }

    /// `(name, value)` pairs in report order.
    pub fn fields(&self) -> [(&'static str, f64); 9] {
        [
            ("mean", self.mean),
            ("std", self.std),
            ("lower_whisker", self.lower_whisker),
            ("q1", self.q1),
            ("median", self.median),
            ("q3", self.q3),
            ("upper_whisker", self.upper_whisker),
            ("min", self.min),
            ("max", self.max),
        ]
    }
}

/// Accumulated relative to the first element, so constant input is exact.
pub fn mean(xs: &[f64]) -> f64 {
    let x0 = xs[0];
    x0 + xs.iter().map(|x| x - x0).sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation; zero for fewer than two samples.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Linear interpolation between order statistics (`(n-1)p` positioning).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Ordinary least-squares slope of `y` on `x`. `None` for fewer than two
/// points, non-finite input or constant `x`.
pub fn ols_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 || points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Slope of `log₁₀ std` against `log₁₀ N`; `None` when a std is zero.
pub fn log_log_slope(ns: &[usize], stds: &[f64]) -> Option<f64> {
    if stds.iter().any(|s| !(*s > 0.0)) {
        return None;
    }
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(stds)
        .map(|(n, s)| ((*n as f64).log10(), s.log10()))
        .collect();
    ols_slope(&pts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalFit {
    pub mu: f64,
    pub sigma: f64,
    /// Kolmogorov–Smirnov distance to `N(mu, sigma²)`.
    pub ks: f64,
}

pub const NORMAL_FIT_MIN_SAMPLES: usize = 30;

pub fn normal_fit(samples: &[f64]) -> Result<NormalFit> {
    if samples.len() < NORMAL_FIT_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            min: NORMAL_FIT_MIN_SAMPLES,
        });
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let mu = mean(&s);
    let sigma = std_dev(&s);
    let ks = if sigma > 0.0 {
        ks_distance(&s, |x| normal::cdf((x - mu) / sigma))
    } else {
        0.0
    };
    Ok(NormalFit { mu, sigma, ks })
}

/// `sup |F_n - F|` for sorted samples.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

/// Equal-width bins spanning `[min, max]`; the last bin is closed.
pub fn histogram(xs: &[f64], bins: usize) -> Vec<HistogramBin> {
    if xs.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in xs {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            bin_left: lo + i as f64 * width,
            bin_right: if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width },
            count,
        })
        .collect()
}
