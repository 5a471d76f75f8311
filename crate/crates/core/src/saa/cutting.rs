//! Kelley's cutting-plane method on the `(γ, ζ)` formulation.
//!
//! Every iterate contributes two supporting hyperplanes of `g_N`: one at the
//! master solution `(γ_k, ζ_k)` and one at `(γ_k, VaR_N(γ_k))`, where `g_N`
//! equals the empirical CVaR. `g_N` is polyhedral, so the outer approximation
//! becomes exact after finitely many cuts.

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpError, SimplexOptions};
use crate::risk::{evaluate_g, select_rank, AuxiliaryPoint, GEvaluation};

use super::{Duals, LossSpec, RunInfo, SaaProblem, Solution, SolveOptions, SolverKind};

struct Cut {
    /// Coefficients on `(γ, ζ)`.
    slope: Vec<f64>,
    /// `g(u_k) - sᵀu_k`
    offset: f64,
}

impl Cut {
    fn new(point: &[f64], eval: &GEvaluation) -> Self {
        let dot: f64 = eval.subgradient.iter().zip(point).map(|(s, u)| s * u).sum();
        Self {
            slope: eval.subgradient.clone(),
            offset: eval.value - dot,
        }
    }
}

struct Master {
    gamma: Vec<f64>,
    zeta: f64,
    objective: f64,
    duals: Duals,
}

/// Solves the sample problem by Kelley's method; `opts.tolerance` is relative
/// to `max(1, K)` for the constraint and to `1 + |v|` for the objective.
pub fn solve_cutting_plane(problem: &SaaProblem<'_>, opts: &SolveOptions) -> Result<Solution> {
    problem.check_tail_size()?;
    let k = problem.capital_limit();
    let c = problem.spec.loss.capital_cost();
    if problem.zeta_low > k {
        // g_N >= CVaR_N >= smallest loss >= ζ_low anywhere in the box
        return Err(Error::Infeasible);
    }

    let mut cuts: Vec<Cut> = Vec::new();
    let mut losses = vec![0.0; problem.scen.nrows()];
    // cut at (γ, ζ) when given, then at (γ, VaR_N(γ)); returns the VaR and g_N there
    let mut add_cuts = |gamma: &[f64], zeta: Option<f64>, cuts: &mut Vec<Cut>| -> Result<(f64, f64)> {
        let var = var_of(problem, gamma, &mut losses);
        for z in zeta.into_iter().chain([var]) {
            let mut u = gamma.to_vec();
            u.push(z);
            let eval = evaluate_g(&AuxiliaryPoint::new(gamma.to_vec(), z), problem.scen, problem.alpha())?;
            cuts.push(Cut::new(&u, &eval));
            if z == var {
                return Ok((var, eval.value));
            }
        }
        unreachable!()
    };
    add_cuts(&problem.spec.gamma_low, None, &mut cuts)?;
    add_cuts(&problem.spec.gamma_up, None, &mut cuts)?;

    let scale = k.max(1.0);
    let mut best: Option<Solution> = None;
    let mut iterations = 0;
    while cuts.len() <= opts.max_cuts {
        iterations += 1;
        let master = solve_master(problem, &cuts)?;
        let gamma = clamp_box(problem, master.gamma);
        let (var, cvar) = add_cuts(&gamma, Some(master.zeta), &mut cuts)?;
        let violation = cvar - k;
        let true_objective = problem.linear_objective(&gamma) + c * cvar;
        let gap = (true_objective - master.objective).max(0.0);
        let run = RunInfo {
            solver: SolverKind::CuttingPlane,
            iterations,
            cuts: cuts.len(),
            objective_gap: gap,
            warnings: Vec::new(),
        };
        let converged = violation <= opts.tolerance * scale && gap <= opts.tolerance * (1.0 + true_objective.abs());
        if converged {
            return problem.finish(gamma, var, master.duals, run);
        }
        let feasible = violation <= 0.0;
        let keep = match &best {
            None => true,
            Some(b) => {
                let b_feasible = b.diagnostics.constraint_violation <= 0.0;
                feasible && (!b_feasible || true_objective < b.value) || !feasible && !b_feasible
            }
        };
        if keep {
            best = Some(problem.finish(gamma, var, master.duals, run)?);
        }
    }
    Err(Error::NoConvergence {
        iterations,
        best: Box::new(best.expect("at least one iterate")),
    })
}

fn var_of(problem: &SaaProblem<'_>, gamma: &[f64], buf: &mut [f64]) -> f64 {
    for (l, row) in buf.iter_mut().zip(problem.scen.rows()) {
        *l = -row.iter().zip(gamma).map(|(x, g)| x * g).sum::<f64>();
    }
    select_rank(buf, problem.alpha().var_rank(buf.len()))
}

fn clamp_box(problem: &SaaProblem<'_>, mut gamma: Vec<f64>) -> Vec<f64> {
    for ((g, l), u) in gamma
        .iter_mut()
        .zip(&problem.spec.gamma_low)
        .zip(&problem.spec.gamma_up)
    {
        *g = g.clamp(*l, *u);
    }
    gamma
}

/// Outer-approximation LP over `(γ, ζ[, θ])`.
fn solve_master(problem: &SaaProblem<'_>, cuts: &[Cut]) -> Result<Master> {
    let d = problem.dim();
    let k = problem.capital_limit();
    let coc = match problem.spec.loss {
        LossSpec::Linear => None,
        LossSpec::CostOfCapital { c } => Some(c),
    };
    let mut cost: Vec<f64> = problem.column_means.iter().map(|m| -m).collect();
    let mut lower = problem.spec.gamma_low.clone();
    let mut upper = problem.spec.gamma_up.clone();
    cost.push(0.0);
    lower.push(problem.zeta_low);
    upper.push(problem.zeta_up);
    if let Some(c) = coc {
        cost.push(c);
        lower.push(problem.zeta_low);
        upper.push(k);
    }
    let mut lp = LinearProgram::new(cost, lower, upper);
    for cut in cuts {
        let mut row: Vec<(usize, f64)> = cut.slope.iter().copied().enumerate().collect();
        match coc {
            None => lp.add_row(row, k - cut.offset),
            Some(_) => {
                row.push((d + 1, -1.0));
                lp.add_row(row, -cut.offset)
            }
        };
    }
    let sol = lp.solve(&SimplexOptions::default()).map_err(|e| match e {
        LpError::Infeasible => Error::Infeasible,
        LpError::Unbounded => Error::Unbounded,
        LpError::IterationLimit => Error::InvalidProblem("master LP hit its iteration limit".into()),
    })?;
    let lambda = match coc {
        // λ is the multiplier of g <= K: the sum of the cut weights
        None => sol.row_duals.iter().map(|y| -y).sum(),
        // θ <= K carries it
        Some(_) => -sol.reduced_costs[d + 1],
    };
    Ok(Master {
        gamma: sol.x[..d].to_vec(),
        zeta: sol.x[d],
        objective: sol.objective,
        duals: Duals::from_reduced_costs(lambda, &sol.reduced_costs[..d]),
    })
}
