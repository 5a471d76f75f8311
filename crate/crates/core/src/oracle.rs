//! Closed-form optimum of the Gaussian problem with unit means and no active
//! box constraint:
//!
//! ```text
//! s  = √(1ᵀΣ⁻¹1)
//! γ* = K / (T_Z - s) · Σ⁻¹1 / s
//! λ* = 1 / (T_Z / s - 1)
//! ```
//!
//! Models with other means reduce to this one by rescaling each component.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{GaussianModel, ScenarioMatrix};
use crate::normal;
use crate::risk::{t_z, AuxiliaryPoint, TailLevel};
use crate::saa::LossSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSolution {
    pub gamma_star: Vec<f64>,
    pub v_star: f64,
    pub zeta_star: f64,
    pub lambda_star: f64,
    /// Standard deviation of the optimal portfolio return.
    pub sigma_s: f64,
    /// Asymptotic standard deviation of `√N (v_N - v*)`.
    pub sigma_clt: f64,
}

impl GaussianSolution {
    pub fn inside_box(&self, low: &[f64], up: &[f64]) -> bool {
        self.gamma_star
            .iter()
            .zip(low.iter().zip(up))
            .all(|(g, (l, u))| l < g && g < u)
    }
}

struct Reduced {
    s: f64,
    t_z: f64,
    /// `Σ⁻¹1`
    sigma_inv_one: DVector<f64>,
}

fn reduce(model: &GaussianModel, alpha: TailLevel) -> Result<Reduced> {
    if model.mean().iter().any(|m| (m - 1.0).abs() > 1e-12) {
        return Err(Error::InvalidProblem(
            "closed form implemented for unit means only; rescale the components first".into(),
        ));
    }
    let d = model.dim();
    let l = model.chol_lower();
    let one = DVector::from_element(d, 1.0);
    let y = l.solve_lower_triangular(&one).ok_or(Error::CovarianceNotSpd)?;
    let sigma_inv_one = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or(Error::CovarianceNotSpd)?;
    let s = one.dot(&sigma_inv_one).sqrt();
    let t_z = t_z(alpha);
    if !(t_z > s) {
        return Err(Error::ClosedForm(format!("T_Z = {t_z} must exceed √(1ᵀΣ⁻¹1) = {s}")));
    }
    Ok(Reduced { s, t_z, sigma_inv_one })
}

pub fn optimal_gamma(k: f64, model: &GaussianModel, alpha: TailLevel) -> Result<Vec<f64>> {
    let r = reduce(model, alpha)?;
    let scale = k / ((r.t_z - r.s) * r.s);
    Ok(r.sigma_inv_one.iter().map(|x| x * scale).collect())
}

/// `v* = -1ᵀγ*`
pub fn optimal_value(k: f64, model: &GaussianModel, alpha: TailLevel) -> Result<f64> {
    Ok(-optimal_gamma(k, model, alpha)?.iter().sum::<f64>())
}

pub fn lambda_star(model: &GaussianModel, alpha: TailLevel) -> Result<f64> {
    let r = reduce(model, alpha)?;
    Ok(1.0 / (r.t_z / r.s - 1.0))
}

pub fn gaussian_solution(k: f64, model: &GaussianModel, alpha: TailLevel) -> Result<GaussianSolution> {
    let r = reduce(model, alpha)?;
    let sigma_s = k / (r.t_z - r.s);
    let gamma_star: Vec<f64> = r.sigma_inv_one.iter().map(|x| x * sigma_s / r.s).collect();
    let v_star = -gamma_star.iter().sum::<f64>();
    let lambda_star = 1.0 / (r.t_z / r.s - 1.0);
    let z = normal::quantile(alpha.value());
    Ok(GaussianSolution {
        zeta_star: v_star + z * sigma_s,
        sigma_clt: analytic_clt_sigma(sigma_s, lambda_star, alpha),
        gamma_star,
        v_star,
        lambda_star,
        sigma_s,
    })
}

/// Exact `√Var(L + λ(G - K))` for a Gaussian portfolio loss with standard
/// deviation `sigma_s`, `ζ` at the VaR and the linear loss. With `a = λ/(1-α)`:
///
/// ```text
/// σ² = σ_S² [1 + 2a(1 - Φ(z)) + a² Var((Z - z)⁺)]
/// ```
pub fn analytic_clt_sigma(sigma_s: f64, lambda: f64, alpha: TailLevel) -> f64 {
    let z = normal::quantile(alpha.value());
    let a = lambda / alpha.tail_mass();
    let tail = normal::sf(z);
    let e1 = normal::pdf(z) - z * tail;
    let e2 = (1.0 + z * z) * tail - z * normal::pdf(z);
    sigma_s * (1.0 + 2.0 * a * tail + a * a * (e2 - e1 * e1)).sqrt()
}

/// Sample standard deviation of `L(u*, X) + λ*(G(u*, X) - K)` over the scenarios.
pub fn clt_sigma(
    u_star: &AuxiliaryPoint,
    lambda_star: f64,
    k: f64,
    scen: &ScenarioMatrix,
    alpha: TailLevel,
    loss: LossSpec,
) -> Result<f64> {
    if u_star.gamma.len() != scen.ncols() {
        return Err(Error::DimensionMismatch {
            expected: scen.ncols(),
            got: u_star.gamma.len(),
        });
    }
    let c = loss.capital_cost();
    let inv = 1.0 / alpha.tail_mass();
    let zeta = u_star.zeta;
    let terms: Vec<f64> = scen
        .portfolio_losses(&u_star.gamma)
        .into_iter()
        .map(|l| {
            let g = zeta + inv * (l - zeta).max(0.0);
            l + c * g + lambda_star * (g - k)
        })
        .collect();
    Ok(sample_std(&terms))
}

pub(crate) fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (ss / (n - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::sample_gaussian;
    use crate::presets;
    use crate::risk::{gaussian_cvar, PortfolioVector};

    fn reference_model() -> GaussianModel {
        GaussianModel::unit_mean(&presets::gaussian_covariance()).unwrap()
    }

    fn alpha() -> TailLevel {
        TailLevel::new(0.99).unwrap()
    }

    #[test]
    fn one_dimensional_identity() {
        let m = GaussianModel::unit_mean(&[vec![1.0]]).unwrap();
        let tz = t_z(alpha());
        let g = optimal_gamma(100.0, &m, alpha()).unwrap();
        assert!((g[0] - 100.0 / (tz - 1.0)).abs() < 1e-10);
        let v = optimal_value(100.0, &m, alpha()).unwrap();
        assert!((v + 100.0 / (tz - 1.0)).abs() < 1e-10);
        assert!((v + 60.05).abs() < 0.01);
        assert!((lambda_star(&m, alpha()).unwrap() - 0.6005).abs() < 1e-4);
        let cvar = gaussian_cvar(&PortfolioVector::new(g).unwrap(), &m, alpha());
        assert!((cvar - 100.0).abs() < 1e-10);
    }

    #[test]
    fn linear_in_k_and_lambda_free_of_k() {
        let m = reference_model();
        let a = optimal_gamma(100.0, &m, alpha()).unwrap();
        let b = optimal_gamma(200.0, &m, alpha()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).abs() < 1e-12 * y);
        }
        let mut last = f64::INFINITY;
        for k in [10.0, 50.0, 100.0, 150.0] {
            let v = optimal_value(k, &m, alpha()).unwrap();
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn kkt_stationarity_and_sigma_s() {
        let m = reference_model();
        let sol = gaussian_solution(100.0, &m, alpha()).unwrap();
        let tz = t_z(alpha());
        let sg = m.covariance() * DVector::from_vec(sol.gamma_star.clone());
        for i in 0..5 {
            let r = -1.0 + sol.lambda_star * (-1.0 + tz * sg[i] / sol.sigma_s);
            assert!(r.abs() < 1e-8, "{r}");
        }
        assert!((m.quadratic_form(&sol.gamma_star).sqrt() - sol.sigma_s).abs() < 1e-8);
    }

    #[test]
    fn closed_loop_on_random_covariances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..60 {
            let d = rng.random_range(1..=10);
            // diagonally dominant with positive off-diagonals keeps Σ⁻¹1 > 0 often enough
            let a: Vec<Vec<f64>> = (0..d)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let mut cov = vec![vec![0.0; d]; d];
            for i in 0..d {
                for j in 0..d {
                    cov[i][j] = (0..d).map(|k| a[i][k] * a[j][k]).sum::<f64>() * 0.1;
                }
                cov[i][i] += 0.5;
            }
            let m = GaussianModel::unit_mean(&cov).unwrap();
            let lv = [0.95, 0.99, 0.995][trial % 3];
            let al = TailLevel::new(lv).unwrap();
            match optimal_gamma(100.0, &m, al) {
                Ok(g) => {
                    let cvar = m.quadratic_form(&g).sqrt() * t_z(al) - g.iter().sum::<f64>();
                    assert!((cvar - 100.0).abs() < 1e-8, "{cvar}");
                }
                Err(Error::ClosedForm(_)) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn precondition_violation() {
        // s = √d grows past T_Z(0.9) = 1.755 for d = 4 with identity Σ
        let cov: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| f64::from(i == j)).collect()).collect();
        let m = GaussianModel::unit_mean(&cov).unwrap();
        let err = optimal_gamma(100.0, &m, TailLevel::new(0.9).unwrap()).unwrap_err();
        assert!(err.to_string().contains("risk level too low"));
    }

    #[test]
    fn non_unit_mean_is_refused() {
        let m = GaussianModel::new(vec![2.0], &[vec![1.0]]).unwrap();
        assert!(optimal_gamma(1.0, &m, alpha()).is_err());
    }

    #[test]
    fn analytic_sigma_matches_quadrature() {
        // Var(Z + a (Z - z)⁺) by Simpson's rule on [-12, 12]
        let al = alpha();
        let z = normal::quantile(0.99);
        let lambda = 0.7;
        let a = lambda / al.tail_mass();
        let f = |x: f64| x + a * (x - z).max(0.0);
        let n = 200_000;
        let (lo, hi) = (-12.0, 12.0);
        let h = (hi - lo) / n as f64;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            m1 += w * f(x) * normal::pdf(x);
            m2 += w * f(x).powi(2) * normal::pdf(x);
        }
        m1 *= h / 3.0;
        m2 *= h / 3.0;
        let quad = (m2 - m1 * m1).sqrt();
        assert!((analytic_clt_sigma(1.0, lambda, al) - quad).abs() < 1e-6, "{quad}");
    }

    #[test]
    fn clt_sigma_without_multiplier_is_portfolio_std() {
        let m = reference_model();
        let sol = gaussian_solution(100.0, &m, alpha()).unwrap();
        let scen = sample_gaussian(&m, 200_000, 5).unwrap();
        let u = AuxiliaryPoint::new(sol.gamma_star.clone(), sol.zeta_star);
        let s = clt_sigma(&u, 0.0, 100.0, &scen, alpha(), LossSpec::Linear).unwrap();
        // std error of a sample std is about σ/√(2N)
        assert!((s - sol.sigma_s).abs() < 4.0 * sol.sigma_s / (2.0 * 200_000f64).sqrt());
    }

    #[test]
    fn empirical_clt_sigma_tracks_closed_form() {
        let m = reference_model();
        let sol = gaussian_solution(100.0, &m, alpha()).unwrap();
        let scen = sample_gaussian(&m, 400_000, 9).unwrap();
        let u = AuxiliaryPoint::new(sol.gamma_star.clone(), sol.zeta_star);
        let s = clt_sigma(&u, sol.lambda_star, 100.0, &scen, alpha(), LossSpec::Linear).unwrap();
        assert!((s / sol.sigma_clt - 1.0).abs() < 0.03, "{s} vs {}", sol.sigma_clt);
    }
}
