//! Capital-constraint multiplier and its tail-expectation cross-check.

use serde::{Deserialize, Serialize};

use super::{SaaProblem, Solution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierCheck {
    /// Dual of the capital constraint reported by the solver.
    pub lp_dual: f64,
    /// `λ = -(∂ℓ/∂γ_j) / E_N(-X_j | tail)` at an interior coordinate `j`.
    pub tail_formula: Option<f64>,
    pub coordinate: Option<usize>,
    pub note: Option<String>,
}

/// Relative distance from a bound below which a coordinate counts as bound.
const INTERIOR_MARGIN: f64 = 1e-6;

/// At an interior coordinate stationarity reads
/// `-X̄_j + (c + λ) E_N(-X_j | tail) = 0`, where the tail is the
/// `⌈N(1-α)⌉` largest portfolio losses.
pub fn extract_multiplier(problem: &SaaProblem<'_>, solution: &Solution) -> MultiplierCheck {
    let lp_dual = solution.lambda;
    let none = |note: &str| MultiplierCheck {
        lp_dual,
        tail_formula: None,
        coordinate: None,
        note: Some(note.to_string()),
    };
    if !solution.active_constraint {
        return MultiplierCheck {
            lp_dual: 0.0,
            ..none("capital constraint inactive")
        };
    }
    let spec = &problem.spec;
    let interior = (0..problem.dim()).filter(|&j| {
        let (lo, up, g) = (spec.gamma_low[j], spec.gamma_up[j], solution.gamma[j]);
        let margin = INTERIOR_MARGIN * (up - lo).max(1e-300);
        g > lo + margin && g < up - margin
    });
    let Some(j) = interior.max_by(|&a, &b| {
        problem.column_means[a]
            .abs()
            .total_cmp(&problem.column_means[b].abs())
            .then(b.cmp(&a))
    }) else {
        return none("formula cross-check unavailable: every coordinate sits on a bound");
    };

    let losses = problem.scen.portfolio_losses(&solution.gamma);
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    let tail = ((losses.len() as f64 * spec.alpha.tail_mass()) - 1e-9).ceil().max(1.0) as usize;
    let tail_mean: f64 = order[..tail].iter().map(|&r| -problem.scen.row(r)[j]).sum::<f64>() / tail as f64;
    let c = spec.loss.capital_cost();
    MultiplierCheck {
        lp_dual,
        tail_formula: Some(problem.column_means[j] / tail_mean - c),
        coordinate: Some(j),
        note: None,
    }
}
