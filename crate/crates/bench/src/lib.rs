//! Shared fixtures for the benchmarks and the acceptance suite.

use cvar_saa::oracle::gaussian_solution;
use cvar_saa::presets;
use cvar_saa::risk::empirical_cvar;
use cvar_saa::{GaussianModel, GaussianSolution, ProblemSpec, ScenarioMatrix, TailLevel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seed used by every acceptance check.
pub const SUITE_SEED: u64 = 42;

pub fn gaussian_model() -> GaussianModel {
    GaussianModel::unit_mean(&presets::gaussian_covariance()).expect("reference covariance is SPD")
}

pub fn gaussian_oracle() -> GaussianSolution {
    gaussian_solution(presets::CAPITAL_LIMIT, &gaussian_model(), TailLevel::default()).expect("closed form")
}

pub fn gaussian_spec(bounded: bool) -> ProblemSpec {
    let (lo, up) = if bounded {
        presets::gaussian_bounded_box()
    } else {
        presets::gaussian_open_box()
    };
    ProblemSpec::new(TailLevel::default(), presets::CAPITAL_LIMIT, lo, up)
}

/// Unit-mean Gaussian with covariance `3 AAᵀ + I`, `A` uniform on `[-1, 1]`.
pub fn random_gaussian_model(rng: &mut ChaCha8Rng, d: usize) -> GaussianModel {
    let a: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let cov: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| 3.0 * (0..d).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    GaussianModel::unit_mean(&cov).expect("3AAᵀ + I is SPD")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Box `[0, up]^d` with `K` at `frac` of the empirical CVaR of the all-upper
/// portfolio, or `None` when that CVaR is not positive.
pub fn binding_spec(scen: &ScenarioMatrix, alpha: TailLevel, up: f64, frac: f64) -> Option<ProblemSpec> {
    let d = scen.ncols();
    let cvar_up = empirical_cvar(&scen.portfolio_losses(&vec![up; d]), alpha).ok()?;
    (cvar_up > 0.0).then(|| ProblemSpec::new(alpha, frac * cvar_up, vec![0.0; d], vec![up; d]))
}
