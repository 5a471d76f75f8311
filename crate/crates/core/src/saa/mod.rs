//! Sample-average problem
//!
//! ```text
//! minimize ℓ_N(γ, ζ)  subject to  g_N(γ, ζ) <= K,  γ_low <= γ <= γ_up
//! ```
//!
//! with `ℓ_N = -γᵀX̄_N` (linear loss) or `ℓ_N = -γᵀX̄_N + c·g_N` (cost of
//! capital). Three solvers share one [`Solution`] type: Kelley cutting planes
//! (the workhorse), the exact epigraph LP (small N) and a brute-force grid
//! over the original CVaR formulation (d <= 3).

mod cutting;
mod epigraph;
mod grid;
mod multiplier;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::ScenarioMatrix;
use crate::risk::{evaluate_g, AuxiliaryPoint, TailLevel};

pub use cutting::solve_cutting_plane;
pub use epigraph::{solve_epigraph_lp, EPIGRAPH_MAX_SCENARIOS};
pub use grid::{solve_direct_grid, GRID_MAX_DIM};
pub use multiplier::{extract_multiplier, MultiplierCheck};

/// Smallest expected tail size `N(1-α)` accepted by the cutting-plane solver.
pub const MIN_TAIL_SCENARIOS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossSpec {
    #[default]
    Linear,
    CostOfCapital {
        c: f64,
    },
}

impl LossSpec {
    /// Weight of `g_N` in the objective.
    pub fn capital_cost(&self) -> f64 {
        match *self {
            LossSpec::Linear => 0.0,
            LossSpec::CostOfCapital { c } => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    #[serde(default)]
    pub alpha: TailLevel,
    pub capital_limit: f64,
    pub gamma_low: Vec<f64>,
    pub gamma_up: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta_low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta_up: Option<f64>,
    #[serde(default)]
    pub loss: LossSpec,
}

impl ProblemSpec {
    pub fn new(alpha: TailLevel, capital_limit: f64, gamma_low: Vec<f64>, gamma_up: Vec<f64>) -> Self {
        Self {
            alpha,
            capital_limit,
            gamma_low,
            gamma_up,
            zeta_low: None,
            zeta_up: None,
            loss: LossSpec::Linear,
        }
    }

    pub fn with_loss(mut self, loss: LossSpec) -> Self {
        self.loss = loss;
        self
    }

    pub fn dim(&self) -> usize {
        self.gamma_low.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if !(self.capital_limit.is_finite() && self.capital_limit > 0.0) {
            return bad(format!("capital_limit must be > 0, got {}", self.capital_limit));
        }
        if self.gamma_low.is_empty() {
            return bad("gamma_low is empty".into());
        }
        if self.gamma_low.len() != self.gamma_up.len() {
            return Err(Error::DimensionMismatch {
                expected: self.gamma_low.len(),
                got: self.gamma_up.len(),
            });
        }
        for (i, (&lo, &up)) in self.gamma_low.iter().zip(&self.gamma_up).enumerate() {
            if !(lo.is_finite() && up.is_finite() && 0.0 <= lo && lo <= up) {
                return bad(format!("empty or invalid box at component {}: [{lo}, {up}]", i + 1));
            }
        }
        match (self.zeta_low, self.zeta_up) {
            (Some(lo), Some(up)) if !(lo < up) => return bad(format!("zeta_low {lo} must be < zeta_up {up}")),
            (Some(z), _) | (_, Some(z)) if !z.is_finite() => return bad("zeta bounds must be finite".into()),
            _ => {}
        }
        if let LossSpec::CostOfCapital { c } = self.loss {
            if !(c > 0.0 && c < 1.0) {
                return bad(format!("cost of capital c must lie in (0, 1), got {c}"));
            }
        }
        Ok(())
    }
}

/// A problem bound to a scenario sample, with resolved `ζ` bounds.
#[derive(Debug, Clone)]
pub struct SaaProblem<'a> {
    pub spec: ProblemSpec,
    pub scen: &'a ScenarioMatrix,
    pub column_means: Vec<f64>,
    pub zeta_low: f64,
    pub zeta_up: f64,
}

/// Validates `spec` against `scen` and fills in missing `ζ` bounds with the
/// extreme portfolio losses over the box, which bracket every empirical VaR.
pub fn assemble_problem<'a>(spec: &ProblemSpec, scen: &'a ScenarioMatrix) -> Result<SaaProblem<'a>> {
    spec.validate()?;
    if scen.ncols() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: scen.ncols(),
        });
    }
    let (lo, up) = loss_range(scen, &spec.gamma_low, &spec.gamma_up);
    let (mut zeta_low, mut zeta_up) = (spec.zeta_low.unwrap_or(lo), spec.zeta_up.unwrap_or(up));
    if zeta_low >= zeta_up {
        // point box with a constant loss
        zeta_low -= 0.5;
        zeta_up += 0.5;
    }
    Ok(SaaProblem {
        spec: spec.clone(),
        scen,
        column_means: scen.column_means().to_vec(),
        zeta_low,
        zeta_up,
    })
}

/// Min and max of `-γᵀX⁽ʲ⁾` over all rows and all `γ` in the box.
fn loss_range(scen: &ScenarioMatrix, low: &[f64], up: &[f64]) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for row in scen.rows() {
        let (mut a, mut b) = (0.0, 0.0);
        for ((x, l), u) in row.iter().zip(low).zip(up) {
            let (p, q) = (-x * l, -x * u);
            a += p.min(q);
            b += p.max(q);
        }
        min = min.min(a);
        max = max.max(b);
    }
    (min, max)
}

impl SaaProblem<'_> {
    pub fn dim(&self) -> usize {
        self.scen.ncols()
    }

    pub fn alpha(&self) -> TailLevel {
        self.spec.alpha
    }

    pub fn capital_limit(&self) -> f64 {
        self.spec.capital_limit
    }

    /// `1 / (N(1-α))`, the hinge weight in `g_N`.
    pub fn hinge_weight(&self) -> f64 {
        1.0 / (self.scen.nrows() as f64 * self.spec.alpha.tail_mass())
    }

    pub fn check_tail_size(&self) -> Result<()> {
        let n = self.scen.nrows();
        let tail = n as f64 * self.spec.alpha.tail_mass();
        if tail < MIN_TAIL_SCENARIOS * (1.0 - 1e-9) {
            let min = (MIN_TAIL_SCENARIOS / self.spec.alpha.tail_mass() - 1e-6).ceil() as usize;
            return Err(Error::SampleTooSmall { n, min });
        }
        Ok(())
    }

    /// `-γᵀX̄_N`
    pub fn linear_objective(&self, gamma: &[f64]) -> f64 {
        -gamma.iter().zip(&self.column_means).map(|(g, m)| g * m).sum::<f64>()
    }

    /// `ℓ_N(γ, ζ)` evaluated from scratch.
    pub fn objective(&self, gamma: &[f64], zeta: f64) -> Result<f64> {
        let lin = self.linear_objective(gamma);
        match self.spec.loss {
            LossSpec::Linear => Ok(lin),
            LossSpec::CostOfCapital { c } => {
                let g = evaluate_g(&AuxiliaryPoint::new(gamma.to_vec(), zeta), self.scen, self.spec.alpha)?;
                Ok(lin + c * g.value)
            }
        }
    }

    /// Builds a [`Solution`] at `(γ, ζ)` with the diagnostics filled in.
    pub(crate) fn finish(&self, gamma: Vec<f64>, zeta: f64, duals: Duals, run: RunInfo) -> Result<Solution> {
        let k = self.capital_limit();
        let g = evaluate_g(&AuxiliaryPoint::new(gamma.clone(), zeta), self.scen, self.alpha())?.value;
        let value = match self.spec.loss {
            LossSpec::Linear => self.linear_objective(&gamma),
            LossSpec::CostOfCapital { c } => self.linear_objective(&gamma) + c * g,
        };
        let scale = k.max(1.0);
        let active = (g - k).abs() <= 1e-6 * scale;
        let mut duals = duals;
        if !active && duals.available && self.spec.loss == LossSpec::Linear {
            // slack constraint: a degenerate LP may still report weight on it
            duals.lambda = 0.0;
            duals.upper = self.column_means.iter().map(|m| m.max(0.0)).collect();
            duals.lower = self.column_means.iter().map(|m| (-m).max(0.0)).collect();
        }
        let box_tol = 1e-9 * (1.0 + self.spec.gamma_up.iter().fold(0.0_f64, |a, b| a.max(*b)));
        let active_upper: Vec<bool> = gamma
            .iter()
            .zip(&self.spec.gamma_up)
            .map(|(g, u)| (u - g).abs() <= box_tol)
            .collect();
        let active_lower: Vec<bool> = gamma
            .iter()
            .zip(&self.spec.gamma_low)
            .map(|(g, l)| (g - l).abs() <= box_tol)
            .collect();
        let mut complementarity = (duals.lambda * (g - k)).abs();
        for i in 0..gamma.len() {
            complementarity += duals.upper[i] * (self.spec.gamma_up[i] - gamma[i]).abs();
            complementarity += duals.lower[i] * (gamma[i] - self.spec.gamma_low[i]).abs();
        }
        let mut warnings = run.warnings;
        if !duals.available {
            warnings.push("multiplier unavailable for this solver".into());
        }
        Ok(Solution {
            gamma,
            zeta,
            value,
            lambda: duals.lambda,
            bound_duals: BoundDuals {
                upper: duals.upper,
                lower: duals.lower,
            },
            active_constraint: active,
            active_upper,
            active_lower,
            iterations: run.iterations,
            cuts: run.cuts,
            solver: run.solver,
            diagnostics: Diagnostics {
                constraint_value: g,
                constraint_violation: (g - k).max(0.0),
                complementarity_residual: complementarity,
                objective_gap: run.objective_gap,
                warnings,
            },
        })
    }
}

pub(crate) struct Duals {
    pub lambda: f64,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub available: bool,
}

impl Duals {
    pub fn unavailable(d: usize) -> Self {
        Self {
            lambda: 0.0,
            upper: vec![0.0; d],
            lower: vec![0.0; d],
            available: false,
        }
    }

    /// Bound multipliers from the reduced costs of the `γ` columns.
    pub fn from_reduced_costs(lambda: f64, reduced: &[f64]) -> Self {
        Self {
            lambda: lambda.max(0.0),
            upper: reduced.iter().map(|r| (-r).max(0.0)).collect(),
            lower: reduced.iter().map(|r| r.max(0.0)).collect(),
            available: true,
        }
    }
}

pub(crate) struct RunInfo {
    pub solver: SolverKind,
    pub iterations: usize,
    pub cuts: usize,
    pub objective_gap: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    CuttingPlane,
    EpigraphLp,
    Grid,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::CuttingPlane => "cutting_plane",
            SolverKind::EpigraphLp => "epigraph_lp",
            SolverKind::Grid => "grid",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cutting_plane" => Ok(SolverKind::CuttingPlane),
            "epigraph_lp" => Ok(SolverKind::EpigraphLp),
            "grid" => Ok(SolverKind::Grid),
            other => Err(Error::Config(format!(
                "unknown solver `{other}` (expected cutting_plane, epigraph_lp or grid)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundDuals {
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `g_N` at the returned point.
    pub constraint_value: f64,
    pub constraint_violation: f64,
    pub complementarity_residual: f64,
    pub objective_gap: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub gamma: Vec<f64>,
    pub zeta: f64,
    pub value: f64,
    pub lambda: f64,
    pub bound_duals: BoundDuals,
    pub active_constraint: bool,
    pub active_upper: Vec<bool>,
    pub active_lower: Vec<bool>,
    pub iterations: usize,
    pub cuts: usize,
    pub solver: SolverKind,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Relative tolerance on constraint violation and objective gap.
    pub tolerance: f64,
    pub max_cuts: usize,
    pub grid_points: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_cuts: 500,
            grid_points: 41,
        }
    }
}

/// Runs the requested solver.
pub fn solve(problem: &SaaProblem<'_>, solver: SolverKind, opts: &SolveOptions) -> Result<Solution> {
    match solver {
        SolverKind::CuttingPlane => solve_cutting_plane(problem, opts),
        SolverKind::EpigraphLp => solve_epigraph_lp(problem),
        SolverKind::Grid => solve_direct_grid(&problem.spec, problem.scen, opts.grid_points),
    }
}
