//! Configuration, scenario runs, the invariant checker and plot output
//! behind the `qkfp` command line.

pub mod check;
pub mod config;
pub mod plot;
pub mod scenario;

use thiserror::Error;

use crate::equilibria::EquilibriumError;
use crate::functionals::FunctionalError;
use crate::grid::GridError;
use crate::macroscopics::MacroError;
use crate::solver::SolverError;

pub use check::{check_snapshot, check_suite, check_suite_with, CheckEntry, CheckReport};
pub use config::{load_config, parse_config, BetaProfile, ConfigError, InitialCondition, ScenarioConfig};
pub use plot::{emit_plot, PlotKind, Series};
pub use scenario::{run_scenario, simulate, sweep_delta, PairReport, RunRecord, SweepRow};

/// Process exit statuses.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const INVARIANT: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const SOLVER: i32 = 3;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Macro(#[from] MacroError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invariant failed: {0}")]
    Invariant(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Invariant(_) => exit::INVARIANT,
            HarnessError::Config(_) | HarnessError::Io(_) | HarnessError::Json(_) => exit::CONFIG,
            HarnessError::Grid(GridError::Snapshot { .. } | GridError::Io(_)) => exit::CONFIG,
            HarnessError::Solver(SolverError::Config(_)) => exit::CONFIG,
            _ => exit::SOLVER,
        }
    }
}
