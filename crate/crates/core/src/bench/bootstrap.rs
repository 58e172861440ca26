use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::controller::Estimate;
use crate::dist::{
    bootstrap_resample, build_empirical, gpd_fit_exceedances, splice_tail, DistError,
    EnergyDistribution, GpdParams, MIN_TAIL_SAMPLES,
};
use crate::solver::derive_seed;
use crate::stopping::{solve_optimal_cost, solve_optimal_cost_model, CostModel, StopError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRow {
    pub unit_cost: f64,
    pub mean_c_star: f64,
    pub std_c_star: f64,
    /// Mean `C*` lies below the tail threshold of the original sample.
    pub in_tail: bool,
}

/// Smallest sample value with at least `fraction` of the sample strictly below.
fn tail_split(d: &EnergyDistribution, n: usize, fraction: f64) -> Option<(f64, usize)> {
    let count = (fraction * n as f64).ceil().max(1.0);
    let mu = d.tail_threshold(count / n as f64)?;
    let below = (d.cdf_below(mu) * n as f64).round() as usize;
    Some((mu, below))
}

/// Replicate with its lower tail replaced by a GPD fit, or the replicate
/// itself when the tail has no spread to fit.
fn tail_model(rep: &EnergyDistribution, n: usize, fraction: f64) -> Result<Estimate, BenchError> {
    let Some((mu, below)) = tail_split(rep, n, fraction) else {
        return Ok(Estimate::Discrete(rep.clone()));
    };
    if below < MIN_TAIL_SAMPLES {
        return Err(DistError::InsufficientTail {
            required: MIN_TAIL_SAMPLES,
            found: below,
        }
        .into());
    }
    let exceedances: Vec<f64> = rep
        .iter()
        .take_while(|&(e, _)| e < mu)
        .flat_map(|(e, w)| std::iter::repeat_n(mu - e, (w * n as f64).round() as usize))
        .collect();
    match gpd_fit_exceedances(&exceedances) {
        Ok((scale, shape)) => {
            let g = GpdParams::new(scale, shape, mu)?;
            Ok(Estimate::Spliced(splice_tail(rep, g)?))
        }
        Err(DistError::DegenerateTail) => Ok(Estimate::Discrete(rep.clone())),
        Err(e) => Err(e.into()),
    }
}

fn solve(model: &Estimate, rep: &EnergyDistribution, cm: &CostModel) -> Result<f64, BenchError> {
    match model {
        Estimate::Discrete(d) => Ok(solve_optimal_cost(d, cm)?),
        _ => match solve_optimal_cost_model(model, cm) {
            Ok(c) => Ok(c),
            // Tail without a finite mean; the plain replicate still has one.
            Err(StopError::NoSolution(_)) => Ok(solve_optimal_cost(rep, cm)?),
            Err(e) => Err(e.into()),
        },
    }
}

/// Bootstrap mean and spread of `C*` over `c_grid`, with the lowest
/// `tail_percent` percent of every replicate modelled by a GPD.
///
/// Replicate `b` is drawn with seed `derive_seed(seed, b)`, so the result is
/// independent of the thread count.
pub fn bootstrap_error_bars(
    samples: &[f64],
    replicates: usize,
    tail_percent: f64,
    c_grid: &[f64],
    t_run: f64,
    seed: u64,
) -> Result<Vec<BootstrapRow>, BenchError> {
    if replicates < 2 {
        return Err(BenchError::DomainError(format!(
            "need at least 2 replicates, got {replicates}"
        )));
    }
    if !(tail_percent > 0.0 && tail_percent < 100.0) {
        return Err(BenchError::DomainError(format!(
            "tail percent must lie in (0, 100), got {tail_percent}"
        )));
    }
    let fraction = tail_percent / 100.0;
    let emp = build_empirical(samples)?;
    let n = samples.len();
    let costs: Vec<CostModel> = c_grid
        .iter()
        .map(|&c| CostModel::new(c, t_run))
        .collect::<Result<_, _>>()?;
    // Fail early when the original sample cannot support a tail fit.
    tail_model(&emp, n, fraction)?;
    let threshold = tail_split(&emp, n, fraction).map(|(mu, _)| mu);

    let per_replicate: Vec<Vec<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let rep = bootstrap_resample(&emp, n, derive_seed(seed, b))?;
            let model = tail_model(&rep, n, fraction)?;
            costs.iter().map(|cm| solve(&model, &rep, cm)).collect()
        })
        .collect::<Result<_, BenchError>>()?;

    let b = replicates as f64;
    Ok(c_grid
        .iter()
        .enumerate()
        .map(|(j, &unit_cost)| {
            let mean = per_replicate.iter().map(|r| r[j]).sum::<f64>() / b;
            let var = per_replicate
                .iter()
                .map(|r| (r[j] - mean).powi(2))
                .sum::<f64>()
                / (b - 1.0);
            BootstrapRow {
                unit_cost,
                mean_c_star: mean,
                std_c_star: var.sqrt(),
                in_tail: threshold.is_some_and(|mu| mean < mu),
            }
        })
        .collect())
}
