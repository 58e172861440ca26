//! Optimal stopping for benchmarking randomized optimizers.

pub mod bench;
pub mod controller;
pub mod dist;
pub mod io;
pub mod parallel;
pub mod solver;
pub mod stopping;
