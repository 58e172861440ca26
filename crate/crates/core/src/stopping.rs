//! Linear-cost optimal stopping.
//!
//! With per-run cost `c·t_run` and i.i.d. energies, the optimal rule stops at
//! the first `e_n <= C*`, where `C*` solves `I(C*) = c·t_run` and
//! `I(C) = E[(C - e)^+]`. `C*` is also the expected total cost of that rule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{DistError, EnergyDistribution, EnergyModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StopError {
    #[error("invalid cost model: unit cost {unit_cost}, run time {run_time}")]
    InvalidCost { unit_cost: f64, run_time: f64 },
    #[error("target {0} has zero probability of being reached")]
    UnreachableTarget(f64),
    #[error("domain error: {0}")]
    DomainError(String),
    #[error("optimality equation has no solution at level {0}")]
    NoSolution(f64),
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// Cost per unit time and time per solver call.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub unit_cost: f64,
    pub run_time: f64,
}

impl CostModel {
    pub fn new(unit_cost: f64, run_time: f64) -> Result<Self, StopError> {
        if !(unit_cost >= 0.0 && unit_cost.is_finite() && run_time > 0.0 && run_time.is_finite()) {
            return Err(StopError::InvalidCost {
                unit_cost,
                run_time,
            });
        }
        Ok(Self {
            unit_cost,
            run_time,
        })
    }

    /// Cost of one solver call, `c·t_run`.
    pub fn per_run(&self) -> f64 {
        self.unit_cost * self.run_time
    }

    fn validate(&self) -> Result<(), StopError> {
        Self::new(self.unit_cost, self.run_time).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingSolution {
    /// `C*`, the expected total cost under the optimal rule.
    pub optimal_cost: f64,
    /// `n* = 1/F(C*)`.
    pub mean_stop_step: f64,
    /// `E* = E[e | e <= C*]`.
    pub optimal_energy: f64,
    /// `T* = n*·c·t_run`.
    pub optimal_effort: f64,
}

/// Exact `C*` for a discrete distribution.
///
/// `c = 0` returns the minimum support value.
pub fn solve_optimal_cost(d: &EnergyDistribution, cm: &CostModel) -> Result<f64, StopError> {
    cm.validate()?;
    Ok(d.solve_exact(cm.per_run()))
}

/// `C*` for any [`EnergyModel`]; discrete inputs should prefer
/// [`solve_optimal_cost`], which is exact.
///
/// `c = 0` returns the lower end of the support, which must be finite.
pub fn solve_optimal_cost_model<M: EnergyModel + ?Sized>(
    m: &M,
    cm: &CostModel,
) -> Result<f64, StopError> {
    cm.validate()?;
    let level = cm.per_run();
    if level == 0.0 {
        let lo = m.lower_bound();
        return if lo.is_finite() {
            Ok(lo)
        } else {
            Err(StopError::NoSolution(level))
        };
    }
    m.solve_partial_expectation(level)
        .ok_or(StopError::NoSolution(level))
}

pub fn mean_stopping_step<M: EnergyModel + ?Sized>(m: &M, c_star: f64) -> Result<f64, StopError> {
    let f = m.cdf(c_star);
    if f > 0.0 {
        Ok(1.0 / f)
    } else {
        Err(StopError::UnreachableTarget(c_star))
    }
}

/// Splits `C*` into expected energy `E*` and expected effort `T*`.
pub fn split_cost(d: &EnergyDistribution, cm: &CostModel) -> Result<StoppingSolution, StopError> {
    let c_star = solve_optimal_cost(d, cm)?;
    split_at(d, cm, c_star)
}

/// [`split_cost`] for an arbitrary model.
pub fn split_cost_model<M: EnergyModel + ?Sized>(
    m: &M,
    cm: &CostModel,
) -> Result<StoppingSolution, StopError> {
    let c_star = solve_optimal_cost_model(m, cm)?;
    split_at(m, cm, c_star)
}

fn split_at<M: EnergyModel + ?Sized>(
    m: &M,
    cm: &CostModel,
    c_star: f64,
) -> Result<StoppingSolution, StopError> {
    let n_star = mean_stopping_step(m, c_star)?;
    let effort = n_star * cm.per_run();
    // E[e | e <= C] = C - I(C)/F(C).
    let energy = c_star - m.partial_expectation(c_star) * n_star;
    Ok(StoppingSolution {
        optimal_cost: c_star,
        mean_stop_step: n_star,
        optimal_energy: energy,
        optimal_effort: effort,
    })
}

/// `dC*/dc = t_run / F(C*)`, the right derivative when `C*` is an atom.
pub fn cost_sensitivity<M: EnergyModel + ?Sized>(
    m: &M,
    c_star: f64,
    cm: &CostModel,
) -> Result<f64, StopError> {
    Ok(cm.run_time * mean_stopping_step(m, c_star)?)
}

/// First-order shift of `C*` when tail masses change by `perturbation`
/// (`(energy, δp)` pairs): `δC* = Σ e·δp / F(C*)`.
pub fn tail_error_estimate<M: EnergyModel + ?Sized>(
    m: &M,
    perturbation: &[(f64, f64)],
    c_star: f64,
) -> Result<f64, StopError> {
    let n_star = mean_stopping_step(m, c_star)?;
    let shift: f64 = perturbation.iter().map(|(e, dp)| e * dp).sum();
    Ok(shift * n_star)
}

/// Expected time to hit a target with confidence `p_d` when one run hits it
/// with probability `p`.
pub fn time_to_target(p: f64, p_d: f64, t_run: f64) -> Result<f64, StopError> {
    let open_unit = |x: f64| x > 0.0 && x < 1.0;
    if !open_unit(p) || !open_unit(p_d) {
        return Err(StopError::DomainError(format!(
            "probabilities must lie in (0, 1), got p={p}, p_d={p_d}"
        )));
    }
    if !(t_run > 0.0) {
        return Err(StopError::DomainError(format!("run time must be positive, got {t_run}")));
    }
    Ok(t_run * (-p_d).ln_1p() / (-p).ln_1p())
}

/// Expected best energy found within a hard time budget: the mean of the
/// minimum of `⌊budget/t_run⌋` draws.
pub fn target_in_time(d: &EnergyDistribution, budget: f64, t_run: f64) -> Result<f64, StopError> {
    if !(t_run > 0.0) || !(budget >= t_run) || !budget.is_finite() {
        return Err(StopError::DomainError(format!(
            "budget {budget} must allow at least one run of length {t_run}"
        )));
    }
    let runs = (budget / t_run).floor() as u64;
    Ok(d.min_of(runs).mean())
}

/// Plays the stopping rule `e_n <= C*` once and returns
/// `min(e_1..e_n) + n·c·t_run`.
pub fn simulate_stopped_sequence(
    d: &EnergyDistribution,
    cm: &CostModel,
    c_star: f64,
    seed: u64,
) -> Result<f64, StopError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    simulate_with_rng(d, cm, c_star, &mut rng)
}

/// [`simulate_stopped_sequence`] drawing from a caller-owned generator.
pub fn simulate_with_rng<R: rand::Rng + ?Sized>(
    d: &EnergyDistribution,
    cm: &CostModel,
    c_star: f64,
    rng: &mut R,
) -> Result<f64, StopError> {
    cm.validate()?;
    if d.cdf(c_star) <= 0.0 {
        return Err(StopError::UnreachableTarget(c_star));
    }
    let mut best = f64::INFINITY;
    let mut n: u64 = 0;
    loop {
        let e = d.sample(rng);
        n += 1;
        best = best.min(e);
        if e <= c_star {
            return Ok(best + n as f64 * cm.per_run());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::GaussianParams;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn coin() -> EnergyDistribution {
        EnergyDistribution::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    fn cm(level: f64) -> CostModel {
        CostModel::new(level, 1.0).unwrap()
    }

    #[test]
    fn hand_solved_examples() {
        assert_abs_diff_eq!(solve_optimal_cost(&coin(), &cm(0.1)).unwrap(), 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(solve_optimal_cost(&coin(), &cm(0.6)).unwrap(), 1.1, epsilon = 1e-12);
        let five = EnergyDistribution::degenerate(5.0).unwrap();
        assert_abs_diff_eq!(solve_optimal_cost(&five, &cm(0.3)).unwrap(), 5.3, epsilon = 1e-12);
        assert_eq!(solve_optimal_cost(&coin(), &cm(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn invalid_costs() {
        assert!(matches!(CostModel::new(-1.0, 1.0), Err(StopError::InvalidCost { .. })));
        assert!(CostModel::new(1.0, 0.0).is_err());
        let bad = CostModel {
            unit_cost: 1.0,
            run_time: -2.0,
        };
        assert!(solve_optimal_cost(&coin(), &bad).is_err());
    }

    #[test]
    fn mean_stop_step_examples() {
        assert_eq!(mean_stopping_step(&coin(), 0.2).unwrap(), 2.0);
        assert_eq!(mean_stopping_step(&coin(), 1.1).unwrap(), 1.0);
        assert_eq!(
            mean_stopping_step(&coin(), -0.5),
            Err(StopError::UnreachableTarget(-0.5))
        );
    }

    #[test]
    fn split_examples() {
        let s = split_cost(&coin(), &cm(0.1)).unwrap();
        assert_abs_diff_eq!(s.optimal_cost, 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(s.mean_stop_step, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.optimal_energy, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.optimal_effort, 0.2, epsilon = 1e-12);

        let s = split_cost(&EnergyDistribution::degenerate(5.0).unwrap(), &cm(0.3)).unwrap();
        assert_abs_diff_eq!(s.optimal_cost, 5.3, epsilon = 1e-12);
        assert_eq!(s.mean_stop_step, 1.0);
        assert_abs_diff_eq!(s.optimal_energy, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.optimal_effort, 0.3, epsilon = 1e-12);

        let s = split_cost(&coin(), &cm(0.6)).unwrap();
        assert_abs_diff_eq!(s.optimal_cost, 1.1, epsilon = 1e-12);
        assert_eq!(s.mean_stop_step, 1.0);
        assert_abs_diff_eq!(s.optimal_energy, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(s.optimal_effort, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn zero_cost_convention() {
        let d = EnergyDistribution::new(vec![-2.0, 1.0, 3.0], vec![0.25, 0.5, 0.25]).unwrap();
        let s = split_cost(&d, &cm(0.0)).unwrap();
        assert_eq!(s.optimal_cost, -2.0);
        assert_eq!(s.mean_stop_step, 4.0);
        assert_eq!(s.optimal_effort, 0.0);
    }

    #[test]
    fn sensitivity_examples() {
        assert_eq!(cost_sensitivity(&coin(), 0.2, &cm(0.1)).unwrap(), 2.0);
        let five = EnergyDistribution::degenerate(5.0).unwrap();
        let t = CostModel::new(0.3, 2.5).unwrap();
        assert_eq!(cost_sensitivity(&five, 5.75, &t).unwrap(), 2.5);
        assert!(cost_sensitivity(&coin(), -1.0, &t).is_err());
    }

    #[test]
    fn sensitivity_matches_finite_difference() {
        let d = EnergyDistribution::new(vec![-4.0, -1.0, 0.5, 2.0], vec![0.1, 0.2, 0.3, 0.4])
            .unwrap();
        let t_run = 1.7;
        for &c in &[0.05, 0.4, 1.3, 3.0] {
            let m = CostModel::new(c, t_run).unwrap();
            let h = 1e-7;
            let c0 = solve_optimal_cost(&d, &m).unwrap();
            let c1 = solve_optimal_cost(&d, &CostModel::new(c + h, t_run).unwrap()).unwrap();
            let fd = (c1 - c0) / h;
            let exact = cost_sensitivity(&d, c0, &m).unwrap();
            assert!((fd - exact).abs() <= 1e-4 * exact, "c={c}: {fd} vs {exact}");
        }
    }

    #[test]
    fn tail_error_examples() {
        let half = EnergyDistribution::new(vec![-10.0, 0.0], vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(
            tail_error_estimate(&half, &[(-10.0, 0.001)], -5.0).unwrap(),
            -0.02,
            epsilon = 1e-15
        );
        assert_eq!(tail_error_estimate(&half, &[], -5.0).unwrap(), 0.0);
        let tenth = EnergyDistribution::new(vec![-10.0, 0.0], vec![0.1, 0.9]).unwrap();
        assert_abs_diff_eq!(
            tail_error_estimate(&tenth, &[(-10.0, 0.001)], -5.0).unwrap(),
            -0.1,
            epsilon = 1e-15
        );
    }

    #[test]
    fn time_to_target_examples() {
        assert_abs_diff_eq!(time_to_target(0.5, 0.99, 1.0).unwrap(), 6.6439, epsilon = 1e-4);
        assert_abs_diff_eq!(time_to_target(0.3, 0.3, 2.0).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(time_to_target(0.01, 0.99, 1.0).unwrap(), 458.21, epsilon = 1e-2);
        assert!(time_to_target(0.0, 0.99, 1.0).is_err());
        assert!(time_to_target(0.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn simulation_examples() {
        let five = EnergyDistribution::degenerate(5.0).unwrap();
        for seed in 0..10 {
            assert_abs_diff_eq!(
                simulate_stopped_sequence(&five, &cm(0.3), 5.3, seed).unwrap(),
                5.3,
                epsilon = 1e-12
            );
        }
        let a = simulate_stopped_sequence(&coin(), &cm(0.1), 0.2, 99).unwrap();
        let b = simulate_stopped_sequence(&coin(), &cm(0.1), 0.2, 99).unwrap();
        assert_eq!(a, b);
        assert!(simulate_stopped_sequence(&coin(), &cm(0.1), -1.0, 0).is_err());
    }

    #[test]
    fn simulation_mean_matches_optimal_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let runs = 100_000;
        let costs: Vec<f64> = (0..runs)
            .map(|_| simulate_with_rng(&coin(), &cm(0.1), 0.2, &mut rng).unwrap())
            .collect();
        let mean = costs.iter().sum::<f64>() / runs as f64;
        let var = costs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        let se = (var / runs as f64).sqrt();
        assert!((mean - 0.2).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    /// Expected minimum of `k` draws by enumerating every `k`-tuple of atoms.
    fn brute_force_min_mean(d: &EnergyDistribution, k: u32) -> f64 {
        let n = d.len();
        let mut total = 0.0;
        for code in 0..n.pow(k) {
            let mut rest = code;
            let mut prob = 1.0;
            let mut best = f64::INFINITY;
            for _ in 0..k {
                let j = rest % n;
                rest /= n;
                prob *= d.weights()[j];
                best = best.min(d.support()[j]);
            }
            total += prob * best;
        }
        total
    }

    #[test]
    fn target_in_time_matches_enumeration() {
        let cases = [
            (vec![0.0, 1.0], vec![0.5, 0.5]),
            (vec![-3.0, -1.0, 2.0], vec![0.2, 0.3, 0.5]),
            (vec![-5.0, 0.0, 0.5, 9.0], vec![0.05, 0.15, 0.5, 0.3]),
        ];
        for (support, weights) in cases {
            let d = EnergyDistribution::new(support, weights).unwrap();
            for k in 1..=5u32 {
                let budget = k as f64 * 2.0 + 0.5;
                let got = target_in_time(&d, budget, 2.0).unwrap();
                assert_abs_diff_eq!(got, brute_force_min_mean(&d, k), epsilon = 1e-9);
            }
        }
        assert!(target_in_time(&coin(), 0.5, 1.0).is_err());
    }

    #[test]
    fn gaussian_model_solution_satisfies_equation() {
        let g = GaussianParams::new(-3.0, 2.0).unwrap();
        for &c in &[1e-6, 1e-3, 0.1, 1.0, 10.0] {
            let m = cm(c);
            let s = split_cost_model(&g, &m).unwrap();
            assert!((g.partial_expectation(s.optimal_cost) - c).abs() < 1e-10 * c.max(1.0));
            assert_abs_diff_eq!(
                s.optimal_energy + s.optimal_effort,
                s.optimal_cost,
                epsilon = 1e-9
            );
        }
        assert!(solve_optimal_cost_model(&g, &cm(0.0)).is_err());
    }

    fn arb_case() -> impl Strategy<Value = (EnergyDistribution, f64)> {
        (crate::dist::arb_distribution(), 1e-4f64..50.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn optimality_equation_holds((d, level) in arb_case()) {
            let c = solve_optimal_cost(&d, &cm(level)).unwrap();
            prop_assert!((d.partial_expectation(c) - level).abs() < 1e-9);
        }

        #[test]
        fn monotone_in_cost((d, level) in arb_case(), bump in 1e-6f64..10.0) {
            let a = solve_optimal_cost(&d, &cm(level)).unwrap();
            let b = solve_optimal_cost(&d, &cm(level + bump)).unwrap();
            prop_assert!(a <= b);
        }

        #[test]
        fn bounds_and_regimes((d, level) in arb_case()) {
            let c = solve_optimal_cost(&d, &cm(level)).unwrap();
            let tol = 1e-9 * (1.0 + c.abs());
            prop_assert!(d.min_energy() < c);
            prop_assert!(c <= d.mean() + level + tol);
            if c >= d.max_energy() {
                prop_assert!((c - (d.mean() + level)).abs() <= tol);
            } else {
                prop_assert!(c < d.mean() + level);
            }
            if let Some(e1) = d.second_energy() {
                if c < e1 {
                    let small_c = d.min_energy() + level / d.weights()[0];
                    prop_assert!((c - small_c).abs() <= tol);
                }
            }
            let s = split_cost(&d, &cm(level)).unwrap();
            prop_assert!((s.optimal_energy + s.optimal_effort - s.optimal_cost).abs() < 1e-9 * (1.0 + c.abs()));
            prop_assert!(s.mean_stop_step >= 1.0);
            prop_assert!(s.optimal_energy <= s.optimal_cost);
        }

        #[test]
        fn binary_reduction(p in 1e-3f64..0.999, level in 1e-4f64..10.0) {
            let m = 1e6 * level / p;
            let d = EnergyDistribution::new(vec![0.0, m], vec![p, 1.0 - p]).unwrap();
            let c = solve_optimal_cost(&d, &cm(level)).unwrap();
            prop_assert!((c - level / p).abs() < 1e-9 * (1.0 + level / p));
        }
    }
}
