//! Portfolio allocation under a Conditional Value-at-Risk budget, solved by
//! sample average approximation.
//!
//! The problem is
//!
//! ```text
//! maximize E[γᵀX]  subject to  CVaR_α(-γᵀX) <= K,  γ_low <= γ <= γ_up
//! ```
//!
//! rewritten with the Rockafellar–Uryasev function `g(γ, ζ)` so that the
//! sample version is a linear program. See [`saa`] for the solvers,
//! [`oracle`] for the Gaussian closed form and [`harness`] for replicated
//! experiments.

// validation rejects NaN by writing checks as negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod harness;
pub mod lp;
pub mod market;
pub mod normal;
pub mod oracle;
pub mod presets;
pub mod risk;
pub mod rng;
pub mod saa;

pub use error::{Error, Result};
pub use market::{
    DependenceSpec, GaussianModel, MarginalSpec, MarginalStats, MarketModel, MultiLawModel, ScenarioMatrix,
};
pub use oracle::GaussianSolution;
pub use risk::{AuxiliaryPoint, PortfolioVector, TailLevel};
pub use saa::{LossSpec, ProblemSpec, SaaProblem, Solution, SolveOptions, SolverKind};
