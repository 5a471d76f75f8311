//! Exact LP with one hinge variable per scenario:
//!
//! ```text
//! t_j >= 0,  t_j >= -γᵀX⁽ʲ⁾ - ζ,  ζ + (N(1-α))⁻¹ Σ t_j <= K
//! ```

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpError, SimplexOptions};

use crate::risk::empirical_var;

use super::{Duals, LossSpec, RunInfo, SaaProblem, Solution, SolverKind};

/// The basis inverse is dense, so memory grows as `N²`.
pub const EPIGRAPH_MAX_SCENARIOS: usize = 5000;

pub fn solve_epigraph_lp(problem: &SaaProblem<'_>) -> Result<Solution> {
    let n = problem.scen.nrows();
    if n > EPIGRAPH_MAX_SCENARIOS {
        return Err(Error::InvalidProblem(format!(
            "epigraph LP limited to N <= {EPIGRAPH_MAX_SCENARIOS} scenarios (got {n})"
        )));
    }
    let d = problem.dim();
    let c = problem.spec.loss.capital_cost();
    let w = problem.hinge_weight();
    let zeta = d;
    let t0 = d + 1;

    let mut cost: Vec<f64> = problem.column_means.iter().map(|m| -m).collect();
    let mut lower = problem.spec.gamma_low.clone();
    let mut upper = problem.spec.gamma_up.clone();
    cost.push(c);
    lower.push(problem.zeta_low);
    upper.push(problem.zeta_up);
    cost.extend(std::iter::repeat_n(c * w, n));
    lower.extend(std::iter::repeat_n(0.0, n));
    upper.extend(std::iter::repeat_n(f64::INFINITY, n));

    let mut lp = LinearProgram::new(cost, lower, upper);
    // with ζ at its upper bound every hinge row starts slack
    lp.start_at_upper(zeta);
    for (j, row) in problem.scen.rows().enumerate() {
        let mut coeffs: Vec<(usize, f64)> = row.iter().enumerate().map(|(i, x)| (i, -x)).collect();
        coeffs.push((zeta, -1.0));
        coeffs.push((t0 + j, -1.0));
        lp.add_row(coeffs, 0.0);
    }
    let mut capital: Vec<(usize, f64)> = vec![(zeta, 1.0)];
    capital.extend((0..n).map(|j| (t0 + j, w)));
    let cap_row = lp.add_row(capital, problem.capital_limit());

    let sol = lp.solve(&SimplexOptions::default()).map_err(|e| match e {
        LpError::Infeasible => Error::Infeasible,
        LpError::Unbounded => Error::Unbounded,
        LpError::IterationLimit => Error::NoConvergence {
            iterations: 0,
            best: Box::new(placeholder(problem)),
        },
    })?;
    let lambda = -sol.row_duals[cap_row];
    let gamma = sol.x[..d].to_vec();
    // with the linear loss ζ only has to keep g_N <= K; the VaR is the
    // tightest such choice
    let zeta_value = match problem.spec.loss {
        LossSpec::Linear => empirical_var(&problem.scen.portfolio_losses(&gamma), problem.alpha())?,
        LossSpec::CostOfCapital { .. } => sol.x[zeta],
    };
    let run = RunInfo {
        solver: SolverKind::EpigraphLp,
        iterations: sol.iterations,
        cuts: 0,
        objective_gap: 0.0,
        warnings: Vec::new(),
    };
    problem.finish(
        gamma,
        zeta_value,
        Duals::from_reduced_costs(lambda, &sol.reduced_costs[..d]),
        run,
    )
}

fn placeholder(problem: &SaaProblem<'_>) -> Solution {
    let d = problem.dim();
    problem
        .finish(
            problem.spec.gamma_low.clone(),
            problem.zeta_up,
            Duals::unavailable(d),
            RunInfo {
                solver: SolverKind::EpigraphLp,
                iterations: 0,
                cuts: 0,
                objective_gap: f64::INFINITY,
                warnings: vec!["simplex iteration limit reached".into()],
            },
        )
        .expect("dimensions already checked")
}
