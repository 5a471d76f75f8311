//! JSON run configuration shared by the command-line tool.
//!
//! ```json
//! {
//!   "problem": { "alpha": 0.99, "capital_limit": 100, "gamma_low": [..], "gamma_up": [..] },
//!   "market": { "gaussian": { "sigma": [[..], ..] } },
//!   "run": { "n": 100000, "seed": 1, "solver": "cutting_plane" }
//! }
//! ```
//!
//! The market block is either `gaussian` (unit means, covariance `sigma`) or
//! `multi_law` (`marginals` plus `dependence`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::market::{GaussianModel, MarketModel, MultiLawModel};
use crate::saa::{LossSpec, ProblemSpec, SolveOptions, SolverKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianMarket {
    /// Covariance matrix, row-major.
    pub sigma: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MarketConfig {
    Gaussian(GaussianMarket),
    MultiLaw(MultiLawModel),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub solution: Option<PathBuf>,
    pub report_csv: Option<PathBuf>,
    pub report_json: Option<PathBuf>,
    pub histogram_csv: Option<PathBuf>,
    pub scenarios: Option<PathBuf>,
}

/// Values substituted when running at full scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullScale {
    #[serde(default = "FullScale::default_k")]
    pub k: usize,
    pub n: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
}

impl FullScale {
    fn default_k() -> usize {
        5000
    }
}

impl Default for FullScale {
    fn default() -> Self {
        Self {
            k: Self::default_k(),
            n: None,
            n_grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "RunSettings::default_solver")]
    pub solver: SolverKind,
    #[serde(default = "RunSettings::default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "RunSettings::default_max_cuts")]
    pub max_cuts: usize,
    #[serde(default = "RunSettings::default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "RunSettings::default_bins")]
    pub histogram_bins: usize,
    /// CSV scenarios to solve on instead of sampling; relative to the config file.
    pub scenario_file: Option<PathBuf>,
    #[serde(default)]
    pub outputs: OutputPaths,
    #[serde(default)]
    pub full: FullScale,
}

impl RunSettings {
    fn default_solver() -> SolverKind {
        SolverKind::CuttingPlane
    }
    fn default_tolerance() -> f64 {
        1e-8
    }
    fn default_max_cuts() -> usize {
        500
    }
    fn default_grid_points() -> usize {
        41
    }
    fn default_bins() -> usize {
        30
    }
}

impl Default for RunSettings {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub market: MarketConfig,
    #[serde(default)]
    pub run: RunSettings,
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

impl RunConfig {
    /// Parses and validates; errors name the offending field.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Config(format!("{path}: {inner}"))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; `run.scenario_file` is resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)?;
        if let Some(file) = &cfg.run.scenario_file {
            if file.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.run.scenario_file = Some(base.join(file));
            }
            let file = cfg.run.scenario_file.as_ref().expect("just set");
            if !file.is_file() {
                return Err(field_error(
                    "run.scenario_file",
                    format!("{} does not exist", file.display()),
                ));
            }
        }
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        match &self.market {
            MarketConfig::Gaussian(g) => g.sigma.len(),
            MarketConfig::MultiLaw(m) => m.marginals.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        match &self.market {
            MarketConfig::Gaussian(g) => {
                if d == 0 {
                    return Err(field_error("market.gaussian.sigma", "matrix is empty"));
                }
                for (i, row) in g.sigma.iter().enumerate() {
                    if row.len() != d {
                        return Err(field_error(
                            "market.gaussian.sigma",
                            format!(
                                "matrix is not square: row {} has {} entries, expected {d}",
                                i + 1,
                                row.len()
                            ),
                        ));
                    }
                }
                GaussianModel::unit_mean(&g.sigma).map_err(|e| field_error("market.gaussian.sigma", e))?;
            }
            MarketConfig::MultiLaw(m) => {
                if d == 0 {
                    return Err(field_error("market.multi_law.marginals", "no marginals given"));
                }
                for (i, spec) in m.marginals.iter().enumerate() {
                    spec.validate()
                        .map_err(|e| field_error(&format!("market.multi_law.marginals[{i}]"), e))?;
                    spec.mean()
                        .map_err(|e| field_error(&format!("market.multi_law.marginals[{i}]"), e))?;
                }
                m.dependence
                    .validate(d)
                    .map_err(|e| field_error("market.multi_law.dependence", e))?;
            }
        }

        let p = &self.problem;
        for (name, v) in [("problem.gamma_low", &p.gamma_low), ("problem.gamma_up", &p.gamma_up)] {
            if v.len() != d {
                return Err(field_error(
                    name,
                    format!("expected {d} entries (market dimension), got {}", v.len()),
                ));
            }
        }
        if !(p.capital_limit.is_finite() && p.capital_limit > 0.0) {
            return Err(field_error("problem.capital_limit", "must be a positive number"));
        }
        for i in 0..d {
            if !(p.gamma_low[i] >= 0.0) {
                return Err(field_error(&format!("problem.gamma_low[{i}]"), "must be >= 0"));
            }
            if !(p.gamma_up[i] >= p.gamma_low[i]) {
                return Err(field_error(&format!("problem.gamma_up[{i}]"), "must be >= gamma_low"));
            }
        }
        if let LossSpec::CostOfCapital { c } = p.loss {
            if !(c > 0.0 && c < 1.0) {
                return Err(field_error("problem.loss.c", "must lie in (0, 1)"));
            }
        }
        p.validate().map_err(|e| field_error("problem", e))?;

        let r = &self.run;
        if r.n == Some(0) {
            return Err(field_error("run.n", "must be >= 1"));
        }
        if let Some(k) = r.k {
            if k < 2 {
                return Err(field_error("run.k", "need at least 2 replications"));
            }
        }
        if let Some(grid) = &r.n_grid {
            if grid.len() < 3 || grid.contains(&0) {
                return Err(field_error("run.n_grid", "need at least 3 positive sample sizes"));
            }
        }
        if !(r.tolerance > 0.0) {
            return Err(field_error("run.tolerance", "must be > 0"));
        }
        if r.max_cuts < 4 {
            return Err(field_error("run.max_cuts", "must be >= 4"));
        }
        if r.grid_points < 2 {
            return Err(field_error("run.grid_points", "must be >= 2"));
        }
        if r.full.k < 2 {
            return Err(field_error("run.full.k", "need at least 2 replications"));
        }
        Ok(())
    }

    pub fn market_model(&self) -> Result<MarketModel> {
        Ok(match &self.market {
            MarketConfig::Gaussian(g) => MarketModel::Gaussian(GaussianModel::unit_mean(&g.sigma)?),
            MarketConfig::MultiLaw(m) => MarketModel::MultiLaw(m.clone()),
        })
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            tolerance: self.run.tolerance,
            max_cuts: self.run.max_cuts,
            grid_points: self.run.grid_points,
        }
    }

    /// Swaps in the full-scale replication count and sample sizes.
    pub fn apply_full_scale(&mut self) {
        let full = self.run.full.clone();
        self.run.k = Some(full.k);
        if let Some(n) = full.n {
            self.run.n = Some(n);
        }
        if let Some(grid) = full.n_grid {
            self.run.n_grid = Some(grid);
        }
    }

    pub fn require_n(&self) -> Result<usize> {
        self.run
            .n
            .ok_or_else(|| field_error("run.n", "missing (set it in the config or pass --n)"))
    }

    pub fn require_k(&self) -> Result<usize> {
        self.run.k.ok_or_else(|| field_error("run.k", "missing"))
    }

    pub fn require_n_grid(&self) -> Result<&[usize]> {
        self.run
            .n_grid
            .as_deref()
            .ok_or_else(|| field_error("run.n_grid", "missing"))
    }

    /// SHA-256 of the configuration with sorted keys, as lowercase hex.
    pub fn config_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let canonical = serde_json::to_vec(&value).expect("value serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GAUSS: &str = r#"{
        "problem": {"alpha": 0.99, "capital_limit": 100, "gamma_low": [0, 0], "gamma_up": [100, 100]},
        "market": {"gaussian": {"sigma": [[1, 0.2], [0.2, 2]]}},
        "run": {"n": 1000, "seed": 4}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::from_json_str(GAUSS).unwrap();
        assert_eq!(c.dim(), 2);
        assert_eq!(c.run.solver, SolverKind::CuttingPlane);
        assert_eq!(c.run.tolerance, 1e-8);
        assert_eq!(c.run.full.k, 5000);
        assert!(c.require_n_grid().is_err());
    }

    #[test]
    fn non_square_sigma_names_the_field() {
        let text = GAUSS.replace("[0.2, 2]", "[0.2, 2, 3]");
        let err = RunConfig::from_json_str(&text).unwrap_err().to_string();
        assert!(
            err.contains("market.gaussian.sigma") && err.contains("not square"),
            "{err}"
        );
    }

    #[test]
    fn type_errors_carry_a_path() {
        let text = GAUSS.replace("\"capital_limit\": 100", "\"capital_limit\": \"lots\"");
        let err = RunConfig::from_json_str(&text).unwrap_err().to_string();
        assert!(err.contains("problem.capital_limit"), "{err}");
        let text = GAUSS.replace("\"seed\": 4", "\"sed\": 4");
        let err = RunConfig::from_json_str(&text).unwrap_err().to_string();
        assert!(err.contains("sed"), "{err}");
    }

    #[test]
    fn box_length_must_match_market() {
        let text = GAUSS.replace("\"gamma_up\": [100, 100]", "\"gamma_up\": [100]");
        let err = RunConfig::from_json_str(&text).unwrap_err().to_string();
        assert!(err.contains("problem.gamma_up"), "{err}");
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::from_json_str(GAUSS).unwrap();
        let reordered = r#"{"run": {"seed": 4, "n": 1000},
            "market": {"gaussian": {"sigma": [[1, 0.2], [0.2, 2]]}},
            "problem": {"gamma_up": [100, 100], "gamma_low": [0, 0], "capital_limit": 100, "alpha": 0.99}}"#;
        let b = RunConfig::from_json_str(reordered).unwrap();
        assert_eq!(a.config_hash(), b.config_hash());
        let mut c = a.clone();
        c.run.seed = 5;
        assert_ne!(a.config_hash(), c.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn full_scale_override() {
        let mut c = RunConfig::from_json_str(GAUSS).unwrap();
        c.apply_full_scale();
        assert_eq!(c.run.k, Some(5000));
    }

    #[test]
    fn multi_law_block() {
        let text = r#"{
            "problem": {"capital_limit": 100, "gamma_low": [0, 0], "gamma_up": [10, 10]},
            "market": {"multi_law": {
                "marginals": [{"family": "generalized_pareto", "shape": 0.25},
                              {"family": "lognormal", "mu_log": 0, "sigma_log": 1.3}],
                "dependence": {"kind": "clayton", "theta": 2}}}
        }"#;
        let c = RunConfig::from_json_str(text).unwrap();
        assert!(matches!(c.market_model().unwrap(), MarketModel::MultiLaw(_)));
        let bad = text.replace("\"theta\": 2", "\"theta\": -1");
        let err = RunConfig::from_json_str(&bad).unwrap_err().to_string();
        assert!(err.contains("market.multi_law.dependence"), "{err}");
    }
}
