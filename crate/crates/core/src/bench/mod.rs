//! Benchmark campaigns, bootstrap error bars, and scaling analysis.

mod bootstrap;
mod campaign;
mod config;
mod scaling;

pub use bootstrap::{bootstrap_error_bars, BootstrapRow};
pub use campaign::{run_benchmark, BenchReport, EnvelopeRow, InstanceSummary, StoppingRow};
pub use config::{
    log_grid, BenchmarkConfig, BootstrapConfig, CostGrid, GeneratorSpec, ScheduleGrid,
};
pub use scaling::{fit_scaling, giveup_size, ScalingFit, ScalingModel};

use thiserror::Error;

use crate::dist::DistError;
use crate::io::IoError;
use crate::solver::SolverError;
use crate::stopping::StopError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("need at least {required} points, got {found}")]
    InsufficientPoints { required: usize, found: usize },
    #[error("value {0} must be positive for a log-space fit")]
    NonPositiveValue(f64),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("least-squares system is singular")]
    Singular,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Stop(#[from] StopError),
    #[error(transparent)]
    Dist(#[from] DistError),
}
