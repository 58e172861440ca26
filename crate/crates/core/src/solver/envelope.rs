use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SolverError;
use crate::dist::EnergyDistribution;
use crate::stopping::{solve_optimal_cost, CostModel};

/// Best run length at one unit cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub unit_cost: f64,
    pub n_sweeps: u64,
    pub optimal_cost: f64,
}

/// Lower envelope of `C*` over run lengths.
///
/// Each candidate runs for `n_sweeps·t_per_sweep`. Ties go to the shorter run.
pub fn optimize_run_length(
    curves: &BTreeMap<u64, EnergyDistribution>,
    c_grid: &[f64],
    t_per_sweep: f64,
) -> Result<Vec<EnvelopePoint>, SolverError> {
    if curves.is_empty() {
        return Err(SolverError::EmptyCandidates);
    }
    c_grid
        .iter()
        .map(|&c| {
            let mut best: Option<EnvelopePoint> = None;
            for (&n_sweeps, d) in curves {
                let cm = CostModel::new(c, n_sweeps as f64 * t_per_sweep)?;
                let cost = solve_optimal_cost(d, &cm)?;
                if best.is_none_or(|b| cost < b.optimal_cost) {
                    best = Some(EnvelopePoint {
                        unit_cost: c,
                        n_sweeps,
                        optimal_cost: cost,
                    });
                }
            }
            Ok(best.expect("curves is nonempty"))
        })
        .collect()
}
