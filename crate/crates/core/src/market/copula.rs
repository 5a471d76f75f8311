use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{spd_cholesky, square_matrix, MarginalSpec, ScenarioMatrix};
use crate::error::{Error, Result};
use crate::normal;
use crate::rng::{open_unit, substream};

/// Copula coupling the business lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DependenceSpec {
    Independent,
    /// Correlation of the latent standard normals.
    GaussianCopula {
        correlation: Vec<Vec<f64>>,
    },
    Clayton {
        theta: f64,
    },
}

impl DependenceSpec {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            DependenceSpec::Independent => Ok(()),
            DependenceSpec::GaussianCopula { correlation } => {
                let m = square_matrix(correlation, d)?;
                if (0..d).any(|i| (m[(i, i)] - 1.0).abs() > 1e-12) {
                    return Err(Error::Dependence("correlation matrix needs a unit diagonal".into()));
                }
                spd_cholesky(&m)
                    .map(|_| ())
                    .ok_or_else(|| Error::Dependence("correlation matrix is not SPD".into()))
            }
            DependenceSpec::Clayton { theta } => {
                if *theta > 0.0 && theta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Dependence(format!("clayton theta must be > 0, got {theta}")))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DependenceSpec::Independent => "independent",
            DependenceSpec::GaussianCopula { .. } => "gaussian",
            DependenceSpec::Clayton { .. } => "clayton",
        }
    }
}

/// `n × d` draws of the copula on the uniform scale, row-major.
///
/// Independent columns use stream `i`; the Gaussian copula draws correlated
/// normals row by row from stream 0; Clayton uses the Marshall–Olkin
/// construction `U_i = (1 + E_i / V)^(-1/θ)` with `V ~ Gamma(1/θ, 1)` from
/// stream `d` and `E_i ~ Exp(1)` from stream `i`.
pub fn sample_copula(dep: &DependenceSpec, d: usize, n: usize, seed: u64) -> Result<Vec<f64>> {
    dep.validate(d)?;
    let mut u = vec![0.0; n * d];
    match dep {
        DependenceSpec::Independent => {
            for i in 0..d {
                let mut rng = substream(seed, i as u64);
                for j in 0..n {
                    u[j * d + i] = open_unit(&mut rng);
                }
            }
        }
        DependenceSpec::GaussianCopula { correlation } => {
            let l = spd_cholesky(&square_matrix(correlation, d)?).ok_or(Error::CovarianceNotSpd)?;
            let mut rng = substream(seed, 0);
            let mut z = vec![0.0; d];
            for row in u.chunks_exact_mut(d) {
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(&mut rng);
                }
                for (i, out) in row.iter_mut().enumerate() {
                    let latent: f64 = (0..=i).map(|k| l[(i, k)] * z[k]).sum();
                    *out = normal::cdf(latent);
                }
            }
        }
        DependenceSpec::Clayton { theta } => {
            let frailty =
                Gamma::new(1.0 / theta, 1.0).map_err(|e| Error::Dependence(format!("clayton frailty: {e}")))?;
            let mut vrng = substream(seed, d as u64);
            let v: Vec<f64> = (0..n).map(|_| frailty.sample(&mut vrng)).collect();
            for i in 0..d {
                let mut rng = substream(seed, i as u64);
                for j in 0..n {
                    let e: f64 = Exp1.sample(&mut rng);
                    u[j * d + i] = (1.0 + e / v[j]).powf(-1.0 / theta);
                }
            }
        }
    }
    // guard the open interval for the quantile transforms
    for x in &mut u {
        *x = x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
    }
    Ok(u)
}

/// Raw losses `X̃` with the given marginals coupled by `dep`.
pub fn sample_joint(marginals: &[MarginalSpec], dep: &DependenceSpec, n: usize, seed: u64) -> Result<ScenarioMatrix> {
    let d = marginals.len();
    if n == 0 || d == 0 {
        return Err(Error::EmptyInput);
    }
    if let DependenceSpec::GaussianCopula { correlation } = dep {
        if correlation.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: correlation.len(),
            });
        }
    }
    for m in marginals {
        m.validate()?;
    }
    let mut data = sample_copula(dep, d, n, seed)?;
    for row in data.chunks_exact_mut(d) {
        for (x, m) in row.iter_mut().zip(marginals) {
            *x = m.quantile(*x);
        }
    }
    ScenarioMatrix::new(n, d, data, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    /// Kendall's tau by counting discordant pairs with a merge sort
    /// (continuous data, no ties).
    fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        let mut buf = vec![0.0; ys.len()];
        fn sort_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
            let n = v.len();
            if n < 2 {
                return 0;
            }
            let mid = n / 2;
            let mut inv = sort_count(&mut v[..mid], &mut buf[..mid]) + sort_count(&mut v[mid..], &mut buf[mid..]);
            let (mut i, mut j, mut k) = (0, mid, 0);
            while i < mid && j < n {
                if v[i] <= v[j] {
                    buf[k] = v[i];
                    i += 1;
                } else {
                    buf[k] = v[j];
                    inv += (mid - i) as u64;
                    j += 1;
                }
                k += 1;
            }
            buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
            k += mid - i;
            buf[k..k + n - j].copy_from_slice(&v[j..n]);
            v.copy_from_slice(&buf[..n]);
            inv
        }
        let n = ys.len() as f64;
        let discordant = sort_count(&mut ys, &mut buf) as f64;
        let pairs = n * (n - 1.0) / 2.0;
        1.0 - 2.0 * discordant / pairs
    }

    fn ks_stat(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn kendall_oracle_small() {
        // brute force over all pairs
        let x: [f64; 6] = [0.3, 1.2, -0.5, 2.2, 0.9, 1.7];
        let y = [1.0, 0.1, -2.0, 3.0, 0.5, 0.4];
        let mut s = 0.0;
        for i in 0..6 {
            for j in i + 1..6 {
                s += ((x[i] - x[j]) * (y[i] - y[j])).signum();
            }
        }
        assert!((kendall_tau(&x, &y) - s / 15.0).abs() < 1e-15);
    }

    #[test]
    fn independent_columns_uncorrelated() {
        let m = [
            MarginalSpec::Gaussian { mean: 2.0, std: 6.0 },
            MarginalSpec::GeneralizedPareto {
                shape: 0.25,
                scale: 1.0,
            },
            MarginalSpec::Lognormal {
                mu_log: 0.0,
                sigma_log: 0.5,
            },
        ];
        let s = sample_joint(&m, &DependenceSpec::Independent, 1_000_000, 1).unwrap();
        for i in 0..3 {
            for j in i + 1..3 {
                let r = pearson(&s.column(i), &s.column(j));
                assert!(r.abs() < 0.01, "corr({i},{j}) = {r}");
            }
        }
    }

    #[test]
    fn clayton_kendall_tau() {
        let m = [MarginalSpec::Gaussian { mean: 0.0, std: 1.0 }; 2];
        let s = sample_joint(&m, &DependenceSpec::Clayton { theta: 2.0 }, 1_000_000, 2).unwrap();
        let tau = kendall_tau(&s.column(0), &s.column(1));
        assert!((tau - 0.5).abs() < 0.02, "tau {tau}");
    }

    #[test]
    fn gaussian_copula_rank_correlation() {
        let corr = presets::copula_correlation();
        let u = sample_copula(
            &DependenceSpec::GaussianCopula {
                correlation: corr.clone(),
            },
            5,
            200_000,
            4,
        )
        .unwrap();
        let col = |i: usize| -> Vec<f64> { u.chunks_exact(5).map(|r| r[i]).collect() };
        for i in 0..5 {
            for j in i + 1..5 {
                let spearman = pearson(&col(i), &col(j));
                let expected = 6.0 / std::f64::consts::PI * (corr[i][j] / 2.0).asin();
                assert!((spearman - expected).abs() < 0.03, "({i},{j}) {spearman} vs {expected}");
            }
        }
    }

    #[test]
    fn marginals_preserved_under_every_copula() {
        let marginals = presets::multi_law_marginals();
        // 1% critical value of the one-sample KS statistic
        let crit = 1.628 / (100_000f64).sqrt();
        for dep in [
            DependenceSpec::Independent,
            DependenceSpec::GaussianCopula {
                correlation: presets::copula_correlation(),
            },
            DependenceSpec::Clayton { theta: 2.0 },
        ] {
            let s = sample_joint(&marginals, &dep, 100_000, 8).unwrap();
            for (i, m) in marginals.iter().enumerate() {
                let ks = ks_stat(s.column(i), |x| m.cdf(x));
                assert!(ks < crit, "{} column {i}: KS {ks}", dep.name());
            }
        }
    }

    #[test]
    fn joint_sampling_deterministic() {
        let marginals = presets::multi_law_marginals();
        let dep = DependenceSpec::Clayton { theta: 2.0 };
        let a = sample_joint(&marginals, &dep, 1000, 5).unwrap();
        let b = sample_joint(&marginals, &dep, 1000, 5).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn dimension_and_parameter_errors() {
        let marginals = presets::multi_law_marginals();
        let small = DependenceSpec::GaussianCopula {
            correlation: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        assert!(matches!(
            sample_joint(&marginals, &small, 10, 0),
            Err(Error::DimensionMismatch { expected: 5, got: 2 })
        ));
        assert!(DependenceSpec::Clayton { theta: 0.0 }.validate(2).is_err());
        let not_unit = DependenceSpec::GaussianCopula {
            correlation: vec![vec![2.0, 0.0], vec![0.0, 1.0]],
        };
        assert!(not_unit.validate(2).is_err());
    }
}
