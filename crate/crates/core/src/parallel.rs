//! Parallel execution models and hardware cost accounting.
//!
//! Three ways to spend `n` cores on a stopping problem:
//! - embarrassing: `n` independent copies per step, keep the minimum energy;
//! - perfect: one copy running `n` times faster;
//! - imperfect: one copy running `n_imp <= n` times faster.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::EnergyDistribution;
use crate::stopping::{solve_optimal_cost, CostModel, StopError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParallelError {
    #[error("invalid parallel plan: {0}")]
    InvalidPlan(String),
    #[error("invalid hardware cost: c_t={c_t}, c_cpu={c_cpu}")]
    InvalidHardwareCost { c_t: f64, c_cpu: f64 },
    #[error("core-count range is empty")]
    EmptyRange,
    #[error(transparent)]
    Stop(#[from] StopError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParallelMode {
    None,
    Embarrassing,
    Perfect,
    Imperfect,
}

/// `n_cpu` cores, of which a single copy can exploit a speedup `n_imp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallelPlan {
    pub n_cpu: u64,
    pub n_imp: f64,
}

impl ParallelPlan {
    pub fn new(n_cpu: u64, n_imp: f64) -> Result<Self, ParallelError> {
        if n_cpu == 0 || !(n_imp >= 1.0 && n_imp <= n_cpu as f64) {
            return Err(ParallelError::InvalidPlan(format!(
                "need 1 <= n_imp <= n_cpu, got n_cpu={n_cpu}, n_imp={n_imp}"
            )));
        }
        Ok(Self { n_cpu, n_imp })
    }

    /// Plan whose speedup equals its width.
    pub fn perfect(n_cpu: u64) -> Result<Self, ParallelError> {
        Self::new(n_cpu, n_cpu as f64)
    }

    pub fn serial() -> Self {
        Self {
            n_cpu: 1,
            n_imp: 1.0,
        }
    }
}

/// Cost rates: `c_t` per unit wall-clock time, `c_cpu` per core per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HardwareCost {
    pub c_t: f64,
    pub c_cpu: f64,
}

impl HardwareCost {
    pub fn new(c_t: f64, c_cpu: f64) -> Result<Self, ParallelError> {
        let ok = |x: f64| x >= 0.0 && x.is_finite();
        if !ok(c_t) || !ok(c_cpu) || c_t + c_cpu == 0.0 {
            return Err(ParallelError::InvalidHardwareCost { c_t, c_cpu });
        }
        Ok(Self { c_t, c_cpu })
    }
}

/// Distribution of the best of `n_cpu` independent draws.
pub fn embarrassing_transform(d: &EnergyDistribution, n_cpu: u64) -> EnergyDistribution {
    d.min_of(n_cpu)
}

/// Unit cost that, paired with the serial run time, reproduces the cost of
/// running under `mode`.
///
/// Speeding a run up by a factor `s` is expressed as dividing the unit cost
/// by `s`, since cost is linear in time.
pub fn effective_unit_cost(hc: &HardwareCost, plan: &ParallelPlan, mode: ParallelMode) -> f64 {
    let n = plan.n_cpu as f64;
    match mode {
        ParallelMode::None => hc.c_t + hc.c_cpu,
        ParallelMode::Embarrassing => hc.c_t + hc.c_cpu * n,
        ParallelMode::Perfect => hc.c_t / n + hc.c_cpu,
        ParallelMode::Imperfect => (hc.c_t + hc.c_cpu * n) / plan.n_imp,
    }
}

/// `C*` when running under `plan` and `mode`.
pub fn evaluate_plan(
    d: &EnergyDistribution,
    hc: &HardwareCost,
    plan: &ParallelPlan,
    t_run: f64,
    mode: ParallelMode,
) -> Result<f64, ParallelError> {
    let cm = CostModel::new(effective_unit_cost(hc, plan, mode), t_run)?;
    let cost = match mode {
        ParallelMode::Embarrassing => solve_optimal_cost(&embarrassing_transform(d, plan.n_cpu), &cm)?,
        _ => solve_optimal_cost(d, &cm)?,
    };
    Ok(cost)
}

/// Core count minimizing `C*` when `n` cores buy the unit cost
/// `c_t/n + c_cpu`. Ties go to the smaller count.
pub fn optimal_cores<I>(
    d: &EnergyDistribution,
    hc: &HardwareCost,
    t_run: f64,
    n_range: I,
) -> Result<(u64, f64), ParallelError>
where
    I: IntoIterator<Item = u64>,
{
    let mut best: Option<(u64, f64)> = None;
    for n in n_range {
        let plan = ParallelPlan::perfect(n)?;
        let cost = evaluate_plan(d, hc, &plan, t_run, ParallelMode::Perfect)?;
        if best.is_none_or(|(bn, bc)| cost < bc || (cost == bc && n < bn)) {
            best = Some((n, cost));
        }
    }
    best.ok_or(ParallelError::EmptyRange)
}

/// One way of splitting a core budget between copies and per-copy speedup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedPoint {
    /// Independent copies per step.
    pub width: u64,
    pub cores_per_copy: u64,
    /// Speedup each copy gets from its cores.
    pub speedup: f64,
    pub optimal_cost: f64,
}

/// Every split of `total_cores` into `width` copies of `total_cores / width`
/// cores each, where a copy with `k` cores runs `speedup(k)` times faster.
///
/// `speedup` is clamped to `[1, k]`.
pub fn mixed_frontier<F>(
    d: &EnergyDistribution,
    hc: &HardwareCost,
    t_run: f64,
    total_cores: u64,
    speedup: F,
) -> Result<Vec<MixedPoint>, ParallelError>
where
    F: Fn(u64) -> f64,
{
    if total_cores == 0 {
        return Err(ParallelError::EmptyRange);
    }
    (1..=total_cores)
        .map(|width| {
            let k = total_cores / width;
            let s = speedup(k).clamp(1.0, k as f64);
            let cores = (width * k) as f64;
            let unit = (hc.c_t + hc.c_cpu * cores) / s;
            let cm = CostModel::new(unit, t_run)?;
            let cost = solve_optimal_cost(&embarrassing_transform(d, width), &cm)?;
            Ok(MixedPoint {
                width,
                cores_per_copy: k,
                speedup: s,
                optimal_cost: cost,
            })
        })
        .collect()
}
