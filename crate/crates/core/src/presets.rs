//! Reference market setups: the five-line Gaussian market and the five-line
//! heavy-tailed market with its copula correlation.

use crate::market::{DependenceSpec, MarginalSpec, MultiLawModel};

pub const CAPITAL_LIMIT: f64 = 100.0;
pub const TAIL_LEVEL: f64 = 0.99;

pub fn gaussian_covariance() -> Vec<Vec<f64>> {
    vec![
        vec![4.490, -0.377, 0.059, 0.585, -1.709],
        vec![-0.377, 6.109, -1.300, 0.229, 1.380],
        vec![0.059, -1.300, 7.059, -1.401, 0.210],
        vec![0.585, 0.229, -1.401, 8.400, -1.250],
        vec![-1.709, 1.380, 0.210, -1.250, 19.934],
    ]
}

/// Box that the unconstrained Gaussian optimum never touches.
pub fn gaussian_open_box() -> (Vec<f64>, Vec<f64>) {
    (vec![0.0; 5], vec![100.0; 5])
}

pub fn gaussian_bounded_box() -> (Vec<f64>, Vec<f64>) {
    (vec![0.0, 0.0, 15.0, 0.0, 6.0], vec![10.0, 30.0, 30.0, 30.0, 30.0])
}

pub fn copula_correlation() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, -0.1285, 0.3979, -0.4731, 0.3879],
        vec![-0.1285, 1.0, -0.0574, -0.2253, -0.3532],
        vec![0.3979, -0.0574, 1.0, -0.5363, 0.12],
        vec![-0.4731, -0.2253, -0.5363, 1.0, 0.0999],
        vec![0.3879, -0.3532, 0.12, 0.0999, 1.0],
    ]
}

/// Two generalized Pareto lines, two lognormal lines, one Gaussian line.
pub fn multi_law_marginals() -> Vec<MarginalSpec> {
    vec![
        MarginalSpec::GeneralizedPareto {
            shape: 0.45,
            scale: 1.0,
        },
        MarginalSpec::GeneralizedPareto {
            shape: 0.25,
            scale: 1.0,
        },
        MarginalSpec::Lognormal {
            mu_log: 0.0,
            sigma_log: 1.7,
        },
        MarginalSpec::Lognormal {
            mu_log: 0.0,
            sigma_log: 1.3,
        },
        MarginalSpec::Gaussian { mean: 2.0, std: 6.0 },
    ]
}

pub fn multi_law_open_box() -> (Vec<f64>, Vec<f64>) {
    (vec![0.0; 5], vec![100.0; 5])
}

pub fn multi_law_bounded_box() -> (Vec<f64>, Vec<f64>) {
    (vec![2.0, 0.0, 0.0, 1.0, 0.0], vec![10.0, 5.0, 10.0, 10.0, 10.0])
}

pub const CLAYTON_THETA: f64 = 2.0;

/// The three dependence settings: independent, Gaussian copula, Clayton.
pub fn multi_law_dependences() -> Vec<DependenceSpec> {
    vec![
        DependenceSpec::Independent,
        DependenceSpec::GaussianCopula {
            correlation: copula_correlation(),
        },
        DependenceSpec::Clayton { theta: CLAYTON_THETA },
    ]
}

pub fn multi_law_model(dependence: DependenceSpec) -> MultiLawModel {
    MultiLawModel {
        marginals: multi_law_marginals(),
        dependence,
    }
}
