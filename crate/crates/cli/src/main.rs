//! `cvar-saa` command-line tool.
//!
//! Artifacts go to `--out` (or the matching `run.outputs` path of the
//! config) and to stdout otherwise; human-readable summaries go to stderr.
//!
//! Exit codes: 0 ok, 1 config or validation error, 2 infeasible, 3 no convergence.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cvar_saa::config::{MarketConfig, RunConfig};
use cvar_saa::harness::{
    convergence_study, histogram, write_histogram_csv, write_report_csv, write_report_json, ExperimentReport,
    Provenance,
};
use cvar_saa::oracle::gaussian_solution;
use cvar_saa::saa::{assemble_problem, extract_multiplier, solve, MultiplierCheck};
use cvar_saa::{Error, GaussianModel, LossSpec, ScenarioMatrix, Solution, SolverKind};

const THREADS_VAR: &str = "CVAR_SAA_THREADS";

#[derive(Parser)]
#[command(
    name = "cvar-saa",
    version,
    about = "CVaR-constrained portfolio allocation by sample average approximation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample scenarios (or read `run.scenario_file`) and solve once.
    Solve(Common),
    /// Closed-form optimum of a Gaussian market.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Solution JSON written by `solve`, compared componentwise.
        #[arg(long)]
        solution: Option<PathBuf>,
    },
    /// Replicated solves over `run.n_grid`: convergence slopes and CLT fit.
    Experiment(Common),
    /// Write a scenario matrix as CSV.
    Sample(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Sample size, overriding `run.n`.
    #[arg(long)]
    n: Option<usize>,
    /// Base seed, overriding `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// cutting_plane, epigraph_lp or grid.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use the `run.full` replication count and sample sizes.
    #[arg(long)]
    full: bool,
}

impl Common {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if self.full {
            cfg.apply_full_scale();
        }
        if let Some(n) = self.n {
            cfg.run.n = Some(n);
        }
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(name) = &self.solver {
            cfg.run.solver = name.parse::<SolverKind>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn provenance(cfg: &RunConfig) -> Provenance {
    Provenance {
        config_hash: cfg.config_hash(),
        base_seed: cfg.run.seed,
    }
}

/// `--out`, then the config's output path, then stdout.
fn open_output(out: Option<&Path>, configured: Option<&Path>) -> anyhow::Result<(Box<dyn Write>, Option<PathBuf>)> {
    match out.or(configured) {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            Ok((Box::new(BufWriter::new(file)), Some(path.to_path_buf())))
        }
        None => Ok((Box::new(BufWriter::new(io::stdout().lock())), None)),
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn scenarios(cfg: &RunConfig) -> anyhow::Result<ScenarioMatrix> {
    if let Some(path) = &cfg.run.scenario_file {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let scen = ScenarioMatrix::read_csv(BufReader::new(file), cfg.run.seed)
            .with_context(|| format!("run.scenario_file {}", path.display()))?;
        if scen.ncols() != cfg.dim() {
            return Err(Error::Config(format!(
                "run.scenario_file: {} columns, market has dimension {}",
                scen.ncols(),
                cfg.dim()
            ))
            .into());
        }
        return Ok(scen);
    }
    Ok(cfg.market_model()?.sample(cfg.require_n()?, cfg.run.seed)?)
}

#[derive(Serialize)]
struct SolveReport<'a> {
    status: &'a str,
    n: usize,
    solution: &'a Solution,
    multiplier: &'a MultiplierCheck,
}

fn cmd_solve(common: &Common) -> anyhow::Result<()> {
    let cfg = common.load()?;
    let scen = scenarios(&cfg)?;
    let problem = assemble_problem(&cfg.problem, &scen)?;
    let (solution, failure) = match solve(&problem, cfg.run.solver, &cfg.solve_options()) {
        Ok(s) => (s, None),
        Err(Error::NoConvergence { iterations, best }) => {
            ((*best).clone(), Some(Error::NoConvergence { iterations, best }))
        }
        Err(e) => return Err(e.into()),
    };
    let multiplier = extract_multiplier(&problem, &solution);
    let report = SolveReport {
        status: if failure.is_some() { "no_convergence" } else { "optimal" },
        n: scen.nrows(),
        solution: &solution,
        multiplier: &multiplier,
    };
    let (out, path) = open_output(common.out.as_deref(), cfg.run.outputs.solution.as_deref())?;
    write_report_json(&report, &provenance(&cfg), out)?;

    eprintln!("solver {} on N = {}: {}", solution.solver, scen.nrows(), report.status);
    eprintln!("gamma = {:?}", solution.gamma);
    eprintln!(
        "v = {:.10}, zeta = {:.10}, lambda = {:.6}, constraint {}",
        solution.value,
        solution.zeta,
        solution.lambda,
        if solution.active_constraint { "active" } else { "slack" }
    );
    for w in &solution.diagnostics.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = path {
        eprintln!("wrote {}", path.display());
    }
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct ComparisonRow {
    target: String,
    oracle: f64,
    solution: f64,
    rel_err: f64,
}

#[derive(Serialize)]
struct OracleReport {
    gamma_star: Vec<f64>,
    v_star: f64,
    zeta_star: f64,
    lambda_star: f64,
    sigma_s: f64,
    sigma_clt: f64,
    inside_box: bool,
    comparison: Option<Vec<ComparisonRow>>,
}

/// Reads `gamma` and `value` from a `solve` artifact or a bare solution.
fn read_solution(path: &Path) -> anyhow::Result<(Vec<f64>, f64)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let json: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("{} is not JSON", path.display()))?;
    let sol = json.pointer("/report/solution").unwrap_or(&json);
    let gamma: Vec<f64> = serde_json::from_value(sol.get("gamma").cloned().unwrap_or_default())
        .map_err(|_| Error::Config(format!("{}: no `gamma` array", path.display())))?;
    let value = sol
        .get("value")
        .and_then(serde_json::Value::as_f64)
        .ok_or_else(|| Error::Config(format!("{}: no numeric `value`", path.display())))?;
    Ok((gamma, value))
}

fn cmd_oracle(common: &Common, solution: Option<&Path>) -> anyhow::Result<()> {
    let cfg = common.load()?;
    let MarketConfig::Gaussian(market) = &cfg.market else {
        return Err(Error::Config("oracle requires gaussian market".into()).into());
    };
    if cfg.problem.loss != LossSpec::Linear {
        return Err(Error::Config("oracle requires the linear loss".into()).into());
    }
    let model = GaussianModel::unit_mean(&market.sigma)?;
    let star = gaussian_solution(cfg.problem.capital_limit, &model, cfg.problem.alpha)?;
    let inside_box = star.inside_box(&cfg.problem.gamma_low, &cfg.problem.gamma_up);

    let comparison = match solution {
        Some(path) => {
            let (gamma, value) = read_solution(path)?;
            if gamma.len() != star.gamma_star.len() {
                return Err(Error::Config(format!(
                    "{}: gamma has {} entries, market has dimension {}",
                    path.display(),
                    gamma.len(),
                    star.gamma_star.len()
                ))
                .into());
            }
            let row = |target: String, oracle: f64, solution: f64| ComparisonRow {
                target,
                oracle,
                solution,
                rel_err: (solution - oracle).abs() / oracle.abs(),
            };
            let mut rows: Vec<ComparisonRow> = star
                .gamma_star
                .iter()
                .zip(&gamma)
                .enumerate()
                .map(|(i, (o, s))| row(format!("gamma{}", i + 1), *o, *s))
                .collect();
            rows.push(row("v".into(), star.v_star, value));
            Some(rows)
        }
        None => None,
    };

    eprintln!("gamma* = {:?}", star.gamma_star);
    eprintln!(
        "v* = {:.10}, zeta* = {:.10}, lambda* = {:.10}, sigma_clt = {:.6}",
        star.v_star, star.zeta_star, star.lambda_star, star.sigma_clt
    );
    if !inside_box {
        eprintln!("warning: closed form lies outside the configured box; it is not the constrained optimum");
    }
    if let Some(rows) = &comparison {
        eprintln!("{:<8} {:>16} {:>16} {:>10}", "target", "oracle", "solution", "rel_err");
        for r in rows {
            eprintln!(
                "{:<8} {:>16.10} {:>16.10} {:>9.4}%",
                r.target,
                r.oracle,
                r.solution,
                100.0 * r.rel_err
            );
        }
    }

    let report = OracleReport {
        gamma_star: star.gamma_star,
        v_star: star.v_star,
        zeta_star: star.zeta_star,
        lambda_star: star.lambda_star,
        sigma_s: star.sigma_s,
        sigma_clt: star.sigma_clt,
        inside_box,
        comparison,
    };
    let (out, path) = open_output(common.out.as_deref(), None)?;
    write_report_json(&report, &provenance(&cfg), out)?;
    if let Some(path) = path {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

/// `dir/stem{suffix}` next to `path`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn print_experiment(report: &ExperimentReport) {
    eprintln!(
        "{:>8} {:>6} {:>16} {:>14} {:>10}",
        "N", "runs", "mean v_N", "std v_N", "active"
    );
    for s in &report.sizes {
        eprintln!(
            "{:>8} {:>6} {:>16.8} {:>14.8} {:>10.3}",
            s.n, s.replications, s.value.mean, s.value.std, s.active_fraction
        );
    }
    let fmt = |s: Option<f64>| s.map_or("undefined".to_string(), |x| format!("{x:.4}"));
    eprintln!("log-log std slope: v {}", fmt(report.slope.value));
    for (i, s) in report.slope.gamma.iter().enumerate() {
        eprintln!("log-log std slope: gamma{} {}", i + 1, fmt(*s));
    }
    if let Some(clt) = &report.clt {
        eprintln!(
            "CLT at N = {}: sqrt(N)(v_N - {:.6}) ~ N({:.4}, {:.4}^2), KS {:.4}",
            clt.n, clt.reference, clt.fit.mu, clt.fit.sigma, clt.fit.ks
        );
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
}

fn cmd_experiment(common: &Common) -> anyhow::Result<()> {
    let cfg = common.load()?;
    let grid = cfg.require_n_grid()?.to_vec();
    let k = cfg.require_k()?;
    if cfg.run.scenario_file.is_some() {
        eprintln!("warning: run.scenario_file is ignored by experiment, which resamples");
    }
    let model = cfg.market_model()?;
    let oracle = match (&cfg.market, cfg.problem.loss) {
        // no closed form once the box binds; the harness falls back to the replication mean
        (MarketConfig::Gaussian(m), LossSpec::Linear) => gaussian_solution(
            cfg.problem.capital_limit,
            &GaussianModel::unit_mean(&m.sigma)?,
            cfg.problem.alpha,
        )
        .ok()
        .filter(|s| s.inside_box(&cfg.problem.gamma_low, &cfg.problem.gamma_up)),
        _ => None,
    };
    let report = convergence_study(
        &cfg.problem,
        &model,
        &grid,
        k,
        cfg.run.seed,
        cfg.run.solver,
        &cfg.solve_options(),
        oracle.as_ref(),
    )?;
    print_experiment(&report);

    let prov = provenance(&cfg);
    let outputs = &cfg.run.outputs;
    let (csv, csv_path) = open_output(common.out.as_deref(), outputs.report_csv.as_deref())?;
    write_report_csv(&report, &prov, csv)?;
    let json_path = outputs
        .report_json
        .clone()
        .or_else(|| csv_path.as_ref().map(|p| p.with_extension("json")));
    if let Some(path) = &json_path {
        write_report_json(&report, &prov, create(path)?)?;
    }
    let hist_path = outputs
        .histogram_csv
        .clone()
        .or_else(|| csv_path.as_ref().map(|p| sibling(p, "_clt_histogram.csv")));
    if let (Some(path), Some(clt)) = (&hist_path, &report.clt) {
        write_histogram_csv(
            &histogram(&clt.scaled_errors, cfg.run.histogram_bins),
            &prov,
            create(path)?,
        )?;
    }
    for path in [csv_path, json_path, hist_path].into_iter().flatten() {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_sample(common: &Common) -> anyhow::Result<()> {
    let cfg = common.load()?;
    let n = cfg.require_n()?;
    let scen = cfg.market_model()?.sample(n, cfg.run.seed)?;
    let (mut out, path) = open_output(common.out.as_deref(), cfg.run.outputs.scenarios.as_deref())?;
    writeln!(out, "{}", provenance(&cfg).header())?;
    scen.write_csv(&mut out)?;
    out.flush()?;
    let means: Vec<String> = scen.column_means().iter().map(|m| format!("{m:.4}")).collect();
    eprintln!("{n} scenarios, column means [{}]", means.join(", "));
    if let Some(path) = path {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let cap: usize = match raw.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => bail!("{THREADS_VAR} must be a positive integer, got `{raw}`"),
    };
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    rayon::ThreadPoolBuilder::new()
        .num_threads(cap.min(available))
        .build_global()
        .map_err(|e| anyhow!("cannot size worker pool: {e}"))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Infeasible) => 2,
        Some(Error::NoConvergence { .. }) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::Solve(c) => cmd_solve(c),
        Command::Oracle { common, solution } => cmd_oracle(common, solution.as_deref()),
        Command::Experiment(c) => cmd_experiment(c),
        Command::Sample(c) => cmd_sample(c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
