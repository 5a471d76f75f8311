//! Replicated sample-and-solve experiments: convergence studies, CLT fits
//! and the multi-law results table.

mod report;
mod stats;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{DependenceSpec, MarginalSpec, MarketModel, MultiLawModel};
use crate::oracle::GaussianSolution;
use crate::rng::derive_seed;
use crate::saa::{assemble_problem, solve, ProblemSpec, Solution, SolveOptions, SolverKind};

pub use report::{write_histogram_csv, write_report_csv, write_report_json, Provenance};
pub use stats::{
    histogram, ks_distance, log_log_slope, normal_fit, ols_slope, quantile_sorted, BoxStats, HistogramBin, NormalFit,
    NORMAL_FIT_MIN_SAMPLES,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

/// Outcomes of `k` independent sample-and-solve cycles at one sample size.
/// Successful replicates are kept in index order; failures are listed apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSet {
    pub n: usize,
    pub k: usize,
    pub base_seed: u64,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    pub gammas: Vec<Vec<f64>>,
    pub zetas: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// Whether `|g_N - K| <= 1e-6 max(1, K)` at the returned point.
    pub active: Vec<bool>,
    pub failures: Vec<ReplicationFailure>,
}

impl ReplicationSet {
    pub fn gamma_component(&self, i: usize) -> Vec<f64> {
        self.gammas.iter().map(|g| g[i]).collect()
    }
}

/// Seed of replicate `index` at sample size `n`.
pub fn replicate_seed(base_seed: u64, n: usize, index: usize) -> u64 {
    derive_seed(derive_seed(base_seed, n as u64), index as u64)
}

/// Runs `k` replications in parallel. Each replicate draws its own seed from
/// `(base_seed, n, index)`, so results do not depend on scheduling.
pub fn run_replications(
    spec: &ProblemSpec,
    model: &MarketModel,
    n: usize,
    k: usize,
    base_seed: u64,
    solver: SolverKind,
    opts: &SolveOptions,
) -> Result<ReplicationSet> {
    if k < 2 {
        return Err(Error::InvalidProblem(format!("need at least 2 replications, got {k}")));
    }
    spec.validate()?;
    if model.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: model.dim(),
        });
    }
    let tail = n as f64 * spec.alpha.tail_mass();
    if tail < crate::saa::MIN_TAIL_SCENARIOS * (1.0 - 1e-9) {
        let min = (crate::saa::MIN_TAIL_SCENARIOS / spec.alpha.tail_mass() - 1e-6).ceil() as usize;
        return Err(Error::SampleTooSmall { n, min });
    }

    let outcomes: Vec<(u64, Result<Solution>)> = (0..k)
        .into_par_iter()
        .map(|i| {
            let seed = replicate_seed(base_seed, n, i);
            let run = || -> Result<Solution> {
                let scen = model.sample(n, seed)?;
                let problem = assemble_problem(spec, &scen)?;
                solve(&problem, solver, opts)
            };
            (seed, run())
        })
        .collect();

    let mut set = ReplicationSet {
        n,
        k,
        base_seed,
        indices: Vec::new(),
        values: Vec::new(),
        gammas: Vec::new(),
        zetas: Vec::new(),
        lambdas: Vec::new(),
        active: Vec::new(),
        failures: Vec::new(),
    };
    for (index, (seed, outcome)) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(sol) => {
                set.indices.push(index);
                set.values.push(sol.value);
                set.zetas.push(sol.zeta);
                set.lambdas.push(sol.lambda);
                set.active.push(sol.active_constraint);
                set.gammas.push(sol.gamma);
            }
            Err(e) => set.failures.push(ReplicationFailure {
                index,
                seed,
                error: e.to_string(),
            }),
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub replications: usize,
    pub failures: usize,
    pub value: BoxStats,
    pub gamma: Vec<BoxStats>,
    pub lambda_mean: f64,
    pub active_fraction: f64,
    /// `‖mean γ_N - γ*‖∞` when a closed form is available.
    pub oracle_distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub value: Option<f64>,
    pub gamma: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Closed-form optimum.
    Oracle,
    /// Mean of `v_N` over the replications at the largest `N`.
    ReplicationMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltSummary {
    pub n: usize,
    pub reference: f64,
    pub reference_kind: ReferenceKind,
    pub fit: NormalFit,
    /// `√N (v_N - reference)` for each replicate.
    pub scaled_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub k: usize,
    pub base_seed: u64,
    pub solver: SolverKind,
    pub sizes: Vec<SizeSummary>,
    pub slope: SlopeFit,
    pub clt: Option<CltSummary>,
    pub oracle: Option<GaussianSolution>,
    pub warnings: Vec<String>,
}

pub fn summarize(set: &ReplicationSet, oracle: Option<&GaussianSolution>) -> Result<SizeSummary> {
    let d = set.gammas.first().map_or(0, Vec::len);
    let value = BoxStats::from_samples(&set.values)?;
    let gamma = (0..d)
        .map(|i| BoxStats::from_samples(&set.gamma_component(i)))
        .collect::<Result<Vec<_>>>()?;
    let oracle_distance = oracle.map(|o| {
        gamma
            .iter()
            .zip(&o.gamma_star)
            .map(|(b, g)| (b.mean - g).abs())
            .fold(0.0, f64::max)
    });
    let mut lambdas = set.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    Ok(SizeSummary {
        n: set.n,
        replications: set.values.len(),
        failures: set.failures.len(),
        value,
        gamma,
        lambda_mean: stats::mean(&lambdas),
        active_fraction: set.active.iter().filter(|a| **a).count() as f64 / set.active.len() as f64,
        oracle_distance,
    })
}

/// Replications over `n_grid`, per-size statistics, log-log slopes of the
/// standard deviations and a normal fit of `√N (v_N - v*)` at the largest N.
///
/// With `oracle` set the CLT reference is `v*`; otherwise the replication mean.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    spec: &ProblemSpec,
    model: &MarketModel,
    n_grid: &[usize],
    k: usize,
    base_seed: u64,
    solver: SolverKind,
    opts: &SolveOptions,
    oracle: Option<&GaussianSolution>,
) -> Result<ExperimentReport> {
    if n_grid.len() < 3 {
        return Err(Error::InvalidProblem(format!(
            "n_grid needs at least 3 sample sizes, got {}",
            n_grid.len()
        )));
    }
    let mut warnings = Vec::new();
    let mut sizes = Vec::with_capacity(n_grid.len());
    let mut last_set = None;
    for &n in n_grid {
        let set = run_replications(spec, model, n, k, base_seed, solver, opts)?;
        if !set.failures.is_empty() {
            warnings.push(format!("N = {n}: {} of {k} replications failed", set.failures.len()));
        }
        if set.values.is_empty() {
            return Err(Error::InvalidProblem(format!(
                "every replication failed at N = {n}: {}",
                set.failures[0].error
            )));
        }
        sizes.push(summarize(&set, oracle)?);
        last_set = Some(set);
    }

    let ns: Vec<usize> = sizes.iter().map(|s| s.n).collect();
    let value_slope = log_log_slope(&ns, &sizes.iter().map(|s| s.value.std).collect::<Vec<_>>());
    if value_slope.is_none() {
        warnings.push("slope undefined for v_N: zero spread at some sample size".into());
    }
    let d = spec.dim();
    let gamma_slopes: Vec<Option<f64>> = (0..d)
        .map(|i| log_log_slope(&ns, &sizes.iter().map(|s| s.gamma[i].std).collect::<Vec<_>>()))
        .collect();
    for (i, s) in gamma_slopes.iter().enumerate() {
        if s.is_none() {
            warnings.push(format!(
                "slope undefined for gamma{}: zero spread at some sample size",
                i + 1
            ));
        }
    }

    let last = last_set.expect("n_grid is non-empty");
    let (reference, reference_kind) = match oracle {
        Some(o) => (o.v_star, ReferenceKind::Oracle),
        None => (
            sizes.last().expect("non-empty").value.mean,
            ReferenceKind::ReplicationMean,
        ),
    };
    let root_n = (last.n as f64).sqrt();
    let scaled_errors: Vec<f64> = last.values.iter().map(|v| root_n * (v - reference)).collect();
    let clt = match normal_fit(&scaled_errors) {
        Ok(fit) => Some(CltSummary {
            n: last.n,
            reference,
            reference_kind,
            fit,
            scaled_errors,
        }),
        Err(e) => {
            warnings.push(format!("no CLT fit: {e}"));
            None
        }
    };

    Ok(ExperimentReport {
        k,
        base_seed,
        solver,
        sizes,
        slope: SlopeFit {
            value: value_slope,
            gamma: gamma_slopes,
        },
        clt,
        oracle: oracle.cloned(),
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiLawRow {
    pub dependence: String,
    pub bounded: bool,
    pub solution: Solution,
}

/// One solve per dependence structure and box. All rows share the seed, so
/// the open and bounded problems of a dependence use the same sample.
pub fn multi_law_table(
    marginals: &[MarginalSpec],
    dependences: &[DependenceSpec],
    boxes: &[(bool, ProblemSpec)],
    n: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<Vec<MultiLawRow>> {
    let mut rows = Vec::new();
    for dep in dependences {
        let model = MarketModel::MultiLaw(MultiLawModel {
            marginals: marginals.to_vec(),
            dependence: dep.clone(),
        });
        let scen = model.sample(n, seed)?;
        for (bounded, spec) in boxes {
            let problem = assemble_problem(spec, &scen)?;
            rows.push(MultiLawRow {
                dependence: dep.name().to_string(),
                bounded: *bounded,
                solution: solve(&problem, SolverKind::CuttingPlane, opts)?,
            });
        }
    }
    Ok(rows)
}
