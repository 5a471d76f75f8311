//! Brute-force reference solver on the original formulation
//! `min ℓ_N(γ) s.t. CVaR_N(γ) <= K` over a regular grid of the box.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::ScenarioMatrix;
use crate::risk::{hinge_objective, select_rank};

use super::{assemble_problem, Duals, ProblemSpec, RunInfo, Solution, SolverKind};

pub const GRID_MAX_DIM: usize = 3;

/// Evaluates every point of a `points_per_dim^d` grid; `ζ` is the empirical
/// VaR at the winning point. Ties go to the lowest grid index.
pub fn solve_direct_grid(spec: &ProblemSpec, scen: &ScenarioMatrix, points_per_dim: usize) -> Result<Solution> {
    let d = spec.dim();
    if d > GRID_MAX_DIM {
        return Err(Error::GridDimension(d));
    }
    let problem = assemble_problem(spec, scen)?;
    let p = points_per_dim.max(2);
    let axes: Vec<Vec<f64>> = spec
        .gamma_low
        .iter()
        .zip(&spec.gamma_up)
        .map(|(&lo, &up)| {
            if lo == up {
                vec![lo]
            } else {
                (0..p).map(|i| lo + (up - lo) * i as f64 / (p - 1) as f64).collect()
            }
        })
        .collect();
    let total: usize = axes.iter().map(Vec::len).product();
    let alpha = spec.alpha;
    let k = spec.capital_limit;
    let c = spec.loss.capital_cost();
    let rank = alpha.var_rank(scen.nrows());

    let point = |mut idx: usize| -> Vec<f64> {
        axes.iter()
            .map(|axis| {
                let v = axis[idx % axis.len()];
                idx /= axis.len();
                v
            })
            .collect()
    };
    let evaluated: Vec<Option<(f64, f64)>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let gamma = point(idx);
            let losses = scen.portfolio_losses(&gamma);
            let mut buf = losses.clone();
            let var = select_rank(&mut buf, rank);
            let cvar = hinge_objective(&losses, var, alpha);
            (cvar <= k + 1e-12 * k.max(1.0)).then(|| (problem.linear_objective(&gamma) + c * cvar, var))
        })
        .collect();
    let best = evaluated
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.map(|(v, z)| (i, v, z)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .ok_or(Error::Infeasible)?;
    let run = RunInfo {
        solver: SolverKind::Grid,
        iterations: total,
        cuts: 0,
        objective_gap: 0.0,
        warnings: Vec::new(),
    };
    problem.finish(point(best.0), best.2, Duals::unavailable(d), run)
}
