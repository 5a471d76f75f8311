//! Standard normal helpers.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

fn standard() -> Normal {
    Normal::standard()
}

pub fn pdf(x: f64) -> f64 {
    standard().pdf(x)
}

pub fn cdf(x: f64) -> f64 {
    standard().cdf(x)
}

/// Upper tail probability, accurate far into the tail.
pub fn sf(x: f64) -> f64 {
    standard().sf(x)
}

pub fn quantile(p: f64) -> f64 {
    standard().inverse_cdf(p)
}
