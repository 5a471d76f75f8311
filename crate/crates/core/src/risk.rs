//! Value-at-Risk, Conditional Value-at-Risk and the auxiliary function
//! `g(γ, ζ) = ζ + (1-α)⁻¹ E[(-γᵀX - ζ)⁺]` with its sample version `g_N`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{GaussianModel, ScenarioMatrix};
use crate::normal;

/// Tail probability level `α` in (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct TailLevel(f64);

impl TailLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::TailLevel(alpha))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 - α`
    pub fn tail_mass(self) -> f64 {
        1.0 - self.0
    }

    /// 1-based rank `⌈αN⌉` of the empirical VaR among `N` sorted losses.
    pub fn var_rank(self, n: usize) -> usize {
        let x = self.0 * n as f64;
        // α is usually a short decimal: keep 0.95 * 100 at rank 95
        let k = (x - 1e-9 * x.max(1.0)).ceil() as usize;
        k.clamp(1, n)
    }
}

impl Default for TailLevel {
    fn default() -> Self {
        Self(0.99)
    }
}

impl TryFrom<f64> for TailLevel {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<TailLevel> for f64 {
    fn from(value: TailLevel) -> f64 {
        value.0
    }
}

/// Non-negative business-line shares `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioVector(Vec<f64>);

impl PortfolioVector {
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::InvalidProblem(format!(
                "portfolio weights must be finite and >= 0: {gamma:?}"
            )));
        }
        Ok(Self(gamma))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// The pair `u = (γ, ζ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryPoint {
    pub gamma: Vec<f64>,
    pub zeta: f64,
}

impl AuxiliaryPoint {
    pub fn new(gamma: Vec<f64>, zeta: f64) -> Self {
        Self { gamma, zeta }
    }
}

/// Smallest `M` with empirical `P(loss <= M) >= α`: the `⌈αN⌉`-th order statistic.
pub fn empirical_var(losses: &[f64], alpha: TailLevel) -> Result<f64> {
    if losses.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut buf = losses.to_vec();
    Ok(select_rank(&mut buf, alpha.var_rank(losses.len())))
}

/// `min_ζ ζ + (N(1-α))⁻¹ Σ (loss_j - ζ)⁺`, attained at the empirical VaR.
pub fn empirical_cvar(losses: &[f64], alpha: TailLevel) -> Result<f64> {
    let var = empirical_var(losses, alpha)?;
    Ok(hinge_objective(losses, var, alpha))
}

/// `ζ + (N(1-α))⁻¹ Σ (loss_j - ζ)⁺` for a fixed `ζ`.
pub fn hinge_objective(losses: &[f64], zeta: f64, alpha: TailLevel) -> f64 {
    let excess: f64 = losses.iter().map(|l| (l - zeta).max(0.0)).sum();
    zeta + excess / (losses.len() as f64 * alpha.tail_mass())
}

/// `k`-th smallest value (1-based); reorders `buf`.
pub(crate) fn select_rank(buf: &mut [f64], k: usize) -> f64 {
    let (_, v, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    *v
}

fn check_dims(point: &AuxiliaryPoint, scen: &ScenarioMatrix) -> Result<()> {
    if point.gamma.len() != scen.ncols() {
        return Err(Error::DimensionMismatch {
            expected: scen.ncols(),
            got: point.gamma.len(),
        });
    }
    Ok(())
}

/// `g_N(γ, ζ)`.
pub fn g_emp(point: &AuxiliaryPoint, scen: &ScenarioMatrix, alpha: TailLevel) -> Result<f64> {
    Ok(evaluate_g(point, scen, alpha)?.value)
}

/// Subgradient of `g_N` at `(γ, ζ)`, laid out as `[∂γ_1, …, ∂γ_d, ∂ζ]`.
///
/// The active set is `{j : -γᵀX⁽ʲ⁾ - ζ > 0}`; off the kinks this is the gradient.
pub fn g_subgradient(point: &AuxiliaryPoint, scen: &ScenarioMatrix, alpha: TailLevel) -> Result<Vec<f64>> {
    Ok(evaluate_g(point, scen, alpha)?.subgradient)
}

/// Value and subgradient of `g_N` from one pass over the scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct GEvaluation {
    pub value: f64,
    pub subgradient: Vec<f64>,
    pub active: usize,
}

const ROW_CHUNK: usize = 16_384;

struct Partial {
    excess: f64,
    active: usize,
    neg_x_sum: Vec<f64>,
}

/// Chunks are reduced in a fixed order, so the result does not depend on the
/// number of worker threads.
pub fn evaluate_g(point: &AuxiliaryPoint, scen: &ScenarioMatrix, alpha: TailLevel) -> Result<GEvaluation> {
    check_dims(point, scen)?;
    let d = scen.ncols();
    let gamma = &point.gamma;
    let zeta = point.zeta;
    let partials: Vec<Partial> = scen
        .as_slice()
        .par_chunks(ROW_CHUNK * d)
        .map(|chunk| {
            let mut p = Partial {
                excess: 0.0,
                active: 0,
                neg_x_sum: vec![0.0; d],
            };
            for row in chunk.chunks_exact(d) {
                let loss = -row.iter().zip(gamma).map(|(x, g)| x * g).sum::<f64>();
                let h = loss - zeta;
                if h > 0.0 {
                    p.excess += h;
                    p.active += 1;
                    for (s, x) in p.neg_x_sum.iter_mut().zip(row) {
                        *s -= x;
                    }
                }
            }
            p
        })
        .collect();

    let mut excess = 0.0;
    let mut active = 0;
    let mut neg_x_sum = vec![0.0; d];
    for p in &partials {
        excess += p.excess;
        active += p.active;
        for (s, x) in neg_x_sum.iter_mut().zip(&p.neg_x_sum) {
            *s += x;
        }
    }
    let w = 1.0 / (scen.nrows() as f64 * alpha.tail_mass());
    let mut subgradient: Vec<f64> = neg_x_sum.iter().map(|s| s * w).collect();
    subgradient.push(1.0 - active as f64 * w);
    Ok(GEvaluation {
        value: zeta + excess * w,
        subgradient,
        active,
    })
}

/// `T_Z = CVaR_α(N(0,1)) = φ(Φ⁻¹(α)) / (1 - α)`.
pub fn t_z(alpha: TailLevel) -> f64 {
    normal::pdf(normal::quantile(alpha.value())) / alpha.tail_mass()
}

/// `CVaR_α(-γᵀX) = -γᵀμ + T_Z √(γᵀΣγ)` for Gaussian returns.
pub fn gaussian_cvar(gamma: &PortfolioVector, model: &GaussianModel, alpha: TailLevel) -> f64 {
    let g = gamma.as_slice();
    let mean: f64 = g.iter().zip(model.mean()).map(|(a, b)| a * b).sum();
    -mean + t_z(alpha) * model.quadratic_form(g).max(0.0).sqrt()
}
