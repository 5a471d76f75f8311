use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::risk::TailLevel;

/// Distribution of one raw business-line loss `X̃_i`.
///
/// The generalized Pareto law has location 0 and CDF
/// `1 - (1 + shape * x / scale)^(-1 / shape)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MarginalSpec {
    Gaussian {
        mean: f64,
        std: f64,
    },
    GeneralizedPareto {
        shape: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    Lognormal {
        mu_log: f64,
        sigma_log: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

/// Standalone statistics of a business line after the unit-mean shift:
/// `mean` and `std` of `X_i`, `var_alpha` / `cvar_alpha` of `-X_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalStats {
    pub mean: f64,
    pub std: f64,
    pub var_alpha: f64,
    pub cvar_alpha: f64,
}

impl MarginalSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::MarginalDomain(msg));
        match *self {
            MarginalSpec::Gaussian { mean, std } => {
                if !mean.is_finite() || !(std > 0.0 && std.is_finite()) {
                    return bad(format!("gaussian needs finite mean and std > 0, got ({mean}, {std})"));
                }
            }
            MarginalSpec::GeneralizedPareto { shape, scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return bad(format!("generalized_pareto scale must be > 0, got {scale}"));
                }
                if !(shape.is_finite() && shape < 0.5) {
                    return bad(format!(
                        "generalized_pareto shape must be < 0.5 for finite variance, got {shape}"
                    ));
                }
            }
            MarginalSpec::Lognormal { mu_log, sigma_log } => {
                if !mu_log.is_finite() || !(sigma_log > 0.0 && sigma_log.is_finite()) {
                    return bad(format!(
                        "lognormal needs finite mu_log and sigma_log > 0, got ({mu_log}, {sigma_log})"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Inverse CDF at `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            MarginalSpec::Gaussian { mean, std } => mean + std * normal::quantile(u),
            MarginalSpec::GeneralizedPareto { shape, scale } => {
                let tail = 1.0 - u;
                if shape == 0.0 {
                    -scale * tail.ln()
                } else {
                    scale * (tail.powf(-shape) - 1.0) / shape
                }
            }
            MarginalSpec::Lognormal { mu_log, sigma_log } => (mu_log + sigma_log * normal::quantile(u)).exp(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            MarginalSpec::Gaussian { mean, std } => normal::cdf((x - mean) / std),
            MarginalSpec::GeneralizedPareto { shape, scale } => {
                if x <= 0.0 {
                    return 0.0;
                }
                if shape == 0.0 {
                    return 1.0 - (-x / scale).exp();
                }
                let base = 1.0 + shape * x / scale;
                if base <= 0.0 {
                    // beyond the upper endpoint of a bounded (shape < 0) law
                    1.0
                } else {
                    1.0 - base.powf(-1.0 / shape)
                }
            }
            MarginalSpec::Lognormal { mu_log, sigma_log } => {
                if x <= 0.0 {
                    0.0
                } else {
                    normal::cdf((x.ln() - mu_log) / sigma_log)
                }
            }
        }
    }

    pub fn mean(&self) -> Result<f64> {
        match *self {
            MarginalSpec::Gaussian { mean, .. } => Ok(mean),
            MarginalSpec::GeneralizedPareto { shape, scale } => {
                if shape >= 1.0 {
                    Err(Error::InfiniteMoment(format!(
                        "generalized_pareto mean with shape {shape}"
                    )))
                } else {
                    Ok(scale / (1.0 - shape))
                }
            }
            MarginalSpec::Lognormal { mu_log, sigma_log } => Ok((mu_log + 0.5 * sigma_log * sigma_log).exp()),
        }
    }

    pub fn std(&self) -> Result<f64> {
        match *self {
            MarginalSpec::Gaussian { std, .. } => Ok(std),
            MarginalSpec::GeneralizedPareto { shape, scale } => {
                if shape >= 0.5 {
                    Err(Error::InfiniteMoment(format!(
                        "generalized_pareto variance with shape {shape}"
                    )))
                } else {
                    Ok(scale / ((1.0 - shape) * (1.0 - 2.0 * shape).sqrt()))
                }
            }
            MarginalSpec::Lognormal { mu_log, sigma_log } => {
                let s2 = sigma_log * sigma_log;
                Ok((s2.exp_m1() * (2.0 * mu_log + s2).exp()).sqrt())
            }
        }
    }

    /// Upper-tail expected shortfall `E[X̃ | X̃ >= q_alpha]` of the raw law.
    pub fn expected_shortfall(&self, alpha: TailLevel) -> Result<f64> {
        let a = alpha.value();
        let q = self.quantile(a);
        match *self {
            MarginalSpec::Gaussian { mean, std } => {
                let z = normal::quantile(a);
                Ok(mean + std * normal::pdf(z) / (1.0 - a))
            }
            MarginalSpec::GeneralizedPareto { shape, scale } => {
                if shape >= 1.0 {
                    return Err(Error::InfiniteMoment(format!(
                        "generalized_pareto tail mean with shape {shape}"
                    )));
                }
                Ok((q + scale) / (1.0 - shape))
            }
            MarginalSpec::Lognormal { sigma_log, .. } => {
                let z = normal::quantile(a);
                Ok(self.mean()? * normal::cdf(sigma_log - z) / (1.0 - a))
            }
        }
    }

    /// Closed-form standalone statistics of `X_i = 1 - (X̃_i - E X̃_i)`.
    pub fn shifted_stats(&self, alpha: TailLevel) -> Result<MarginalStats> {
        self.validate()?;
        let mean = self.mean()?;
        let std = self.std()?;
        // -X_i = X̃_i - E X̃_i - 1
        let var_alpha = self.quantile(alpha.value()) - mean - 1.0;
        let cvar_alpha = self.expected_shortfall(alpha)? - mean - 1.0;
        Ok(MarginalStats {
            mean: 1.0,
            std,
            var_alpha,
            cvar_alpha,
        })
    }
}

/// Standalone statistics of a business line after the unit-mean shift.
pub fn marginal_stats(spec: &MarginalSpec, alpha: TailLevel) -> Result<MarginalStats> {
    spec.shifted_stats(alpha)
}
