//! Ising instances, simulated annealing, and run-length selection.

mod anneal;
mod brute;
mod envelope;
mod instance;

pub use anneal::{
    derive_seed, sa_run, sample_batch, Adjacency, AnnealSchedule, Annealer, SampleRecord,
};
pub use brute::{brute_force_ground_state, GroundState, MAX_BRUTE_FORCE_VARS};
pub use envelope::{optimize_run_length, EnvelopePoint};
pub use instance::{energy, generate_complete_instance, Coupling, IsingInstance, MAX_COUPLING};

use thiserror::Error;

use crate::stopping::StopError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid instance size {0}")]
    InvalidSize(usize),
    #[error("expected {expected} spins, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("spin {index} has value {value}, expected ±1")]
    InvalidSpin { index: usize, value: i8 },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("{0} variables is too many for exhaustive search (max {MAX_BRUTE_FORCE_VARS})")]
    TooLarge(usize),
    #[error("no run-length candidates")]
    EmptyCandidates,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Stop(#[from] StopError),
}
