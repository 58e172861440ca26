//! Online stopping: learn the energy distribution while sampling and stop as
//! soon as the latest energy is at or below the current `C*` estimate.
//!
//! The estimate has two regimes. During burn-in (`n <= burn_in_len`) it is a
//! Gaussian ML fit or a Dirichlet posterior predictive, depending on the
//! policy. Afterwards it is the empirical distribution with a GPD lower tail
//! fitted to the `tail_obs` lowest observations.
//!
//! A GPD tail can put `C*` below every energy the solver will ever return.
//! The override stops the session once a stopping value should already have
//! been seen with probability `override_level`.

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{
    gpd_fit_exceedances, splice_tail, DirichletPosterior, DistError, EnergyDistribution,
    EnergyModel, GaussianParams, GpdParams, SplicedDistribution,
};
use crate::stopping::{solve_optimal_cost_model, CostModel, StopError};

pub const DEFAULT_BURN_IN_LEN: usize = 500;
pub const DEFAULT_TAIL_OBS: usize = 100;
pub const DEFAULT_OVERRIDE_LEVEL: f64 = 0.99;
pub const DEFAULT_MAX_ITERATIONS: u64 = 10_000_000;
/// Virtual observations behind a family prior.
pub const DEFAULT_PRIOR_STRENGTH: f64 = 500.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("session already stopped")]
    SessionClosed,
    #[error("observed energy {0} is not finite")]
    NonFinite(f64),
    #[error("no estimate available yet")]
    InsufficientData,
    #[error("session did not stop within {0} iterations")]
    MaxIterations(u64),
    #[error(transparent)]
    Stop(#[from] StopError),
    #[error(transparent)]
    Dist(#[from] DistError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    GaussianMl,
    BayesDirichlet,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::GaussianMl => "gaussian-ml",
            Policy::BayesDirichlet => "bayes-dirichlet",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub policy: Policy,
    pub burn_in_len: usize,
    pub tail_obs: usize,
    pub override_level: f64,
    pub cost: CostModel,
    /// Starting posterior for the Bayesian policy. Without one the posterior
    /// is built from the observations alone.
    pub prior: Option<DirichletPosterior>,
    pub max_iterations: u64,
}

impl SessionConfig {
    pub fn new(policy: Policy, cost: CostModel) -> Self {
        Self {
            policy,
            burn_in_len: DEFAULT_BURN_IN_LEN,
            tail_obs: DEFAULT_TAIL_OBS,
            override_level: DEFAULT_OVERRIDE_LEVEL,
            cost,
            prior: None,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn with_prior(mut self, prior: DirichletPosterior) -> Self {
        self.prior = Some(prior);
        self
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let fail = |msg: String| Err(ControllerError::InvalidConfig(msg));
        if self.burn_in_len < 2 {
            return fail(format!("burn_in_len must be >= 2, got {}", self.burn_in_len));
        }
        if self.tail_obs < crate::dist::MIN_TAIL_SAMPLES {
            return fail(format!("tail_obs must be >= 20, got {}", self.tail_obs));
        }
        if !(self.override_level > 0.0 && self.override_level < 1.0) {
            return fail(format!(
                "override_level must lie in (0, 1), got {}",
                self.override_level
            ));
        }
        if self.max_iterations == 0 {
            return fail("max_iterations must be positive".into());
        }
        CostModel::new(self.cost.unit_cost, self.cost.run_time)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    BurnIn,
    Asymptotic,
}

/// Current model of the energy distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Estimate {
    Gaussian(GaussianParams),
    Discrete(EnergyDistribution),
    Spliced(SplicedDistribution),
}

impl EnergyModel for Estimate {
    fn cdf(&self, x: f64) -> f64 {
        match self {
            Estimate::Gaussian(g) => g.cdf(x),
            Estimate::Discrete(d) => d.cdf(x),
            Estimate::Spliced(s) => s.cdf(x),
        }
    }

    fn partial_expectation(&self, x: f64) -> f64 {
        match self {
            Estimate::Gaussian(g) => g.partial_expectation(x),
            Estimate::Discrete(d) => d.partial_expectation(x),
            Estimate::Spliced(s) => s.partial_expectation(x),
        }
    }

    fn mean(&self) -> f64 {
        match self {
            Estimate::Gaussian(g) => EnergyModel::mean(g),
            Estimate::Discrete(d) => d.mean(),
            Estimate::Spliced(s) => s.mean(),
        }
    }

    fn lower_bound(&self) -> f64 {
        match self {
            Estimate::Gaussian(g) => g.lower_bound(),
            Estimate::Discrete(d) => d.min_energy(),
            Estimate::Spliced(s) => s.lower_bound(),
        }
    }

    fn solve_partial_expectation(&self, level: f64) -> Option<f64> {
        match self {
            Estimate::Gaussian(g) => g.solve_partial_expectation(level),
            Estimate::Discrete(d) => d.solve_partial_expectation(level),
            Estimate::Spliced(s) => s.solve_partial_expectation(level),
        }
    }
}

/// One row of the session log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub n: u64,
    pub energy: f64,
    /// `C*_{c,n}`; empty while no estimate exists.
    pub target: Option<f64>,
    pub decision: Decision,
}

/// End-of-session report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub policy: Policy,
    pub stop_step: u64,
    pub realized_cost: f64,
    pub best_energy: f64,
    pub final_target: Option<f64>,
    pub stopped_by_override: bool,
    pub unit_cost: f64,
    pub run_time: f64,
}

#[derive(Debug, Clone)]
pub struct SessionState {
    config: SessionConfig,
    observations: Vec<f64>,
    counts: BTreeMap<OrderedFloat<f64>, u64>,
    // Welford accumulators for the Gaussian fit.
    running_mean: f64,
    running_m2: f64,
    posterior: Option<DirichletPosterior>,
    estimate: Option<Estimate>,
    regime: Regime,
    target: Option<f64>,
    stopped: bool,
    stopped_by_override: bool,
    best: f64,
    log: Vec<LogRow>,
    tail_cache: Option<(TailKey, Option<GpdParams>)>,
}

/// Identifies the tail sample: threshold and number of observations below it.
type TailKey = (OrderedFloat<f64>, u64);

impl SessionState {
    pub fn new(config: SessionConfig) -> Result<Self, ControllerError> {
        config.validate()?;
        let posterior = config.prior.clone();
        Ok(Self {
            config,
            observations: Vec::new(),
            counts: BTreeMap::new(),
            running_mean: 0.0,
            running_m2: 0.0,
            posterior,
            estimate: None,
            regime: Regime::BurnIn,
            target: None,
            stopped: false,
            stopped_by_override: false,
            best: f64::INFINITY,
            log: Vec::new(),
            tail_cache: None,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn n(&self) -> u64 {
        self.observations.len() as u64
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn current_target(&self) -> Option<f64> {
        self.target
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    pub fn stopped_by_override(&self) -> bool {
        self.stopped_by_override
    }

    pub fn best_energy(&self) -> Option<f64> {
        (self.n() > 0).then_some(self.best)
    }

    pub fn log(&self) -> &[LogRow] {
        &self.log
    }

    /// Estimate used for the latest decision.
    pub fn current_estimate(&self) -> Result<&Estimate, ControllerError> {
        self.estimate.as_ref().ok_or(ControllerError::InsufficientData)
    }

    /// Dirichlet posterior predictive, for the Bayesian policy.
    pub fn posterior_predictive(&self) -> Option<EnergyDistribution> {
        self.posterior.as_ref().map(DirichletPosterior::predictive)
    }

    /// `min(e_1..e_n) + n·c·t_run`, once stopped.
    pub fn realized_cost(&self) -> Option<f64> {
        self.stopped
            .then(|| self.best + self.n() as f64 * self.config.cost.per_run())
    }

    pub fn summary(&self) -> Option<SessionSummary> {
        Some(SessionSummary {
            policy: self.config.policy,
            stop_step: self.n(),
            realized_cost: self.realized_cost()?,
            best_energy: self.best,
            final_target: self.target,
            stopped_by_override: self.stopped_by_override,
            unit_cost: self.config.cost.unit_cost,
            run_time: self.config.cost.run_time,
        })
    }

    /// Records `e`, refits, and decides whether to stop.
    pub fn observe(&mut self, e: f64) -> Result<Decision, ControllerError> {
        if self.stopped {
            return Err(ControllerError::SessionClosed);
        }
        if !e.is_finite() {
            return Err(ControllerError::NonFinite(e));
        }
        self.record(e)?;
        let n = self.n();
        self.regime = if n as usize <= self.config.burn_in_len {
            Regime::BurnIn
        } else {
            Regime::Asymptotic
        };
        self.estimate = match self.regime {
            Regime::BurnIn => self.burn_in_estimate()?,
            Regime::Asymptotic => match self.asymptotic_estimate()? {
                Some(est) => Some(est),
                None => self.burn_in_estimate()?,
            },
        };
        self.target = None;
        if let Some(est) = &self.estimate {
            self.target = match solve_optimal_cost_model(est, &self.config.cost) {
                Ok(c) => Some(c),
                Err(StopError::NoSolution(_)) if self.regime == Regime::Asymptotic => {
                    // Typically a tail without finite mean; use the burn-in model.
                    self.estimate = self.burn_in_estimate()?;
                    match &self.estimate {
                        Some(est) => Some(solve_optimal_cost_model(est, &self.config.cost)?),
                        None => None,
                    }
                }
                Err(err) => return Err(err.into()),
            };
        }
        let decision = match self.target {
            Some(target) if e <= target => Decision::Stop,
            Some(_) if self.override_check() => {
                self.stopped_by_override = true;
                Decision::Stop
            }
            _ => Decision::Continue,
        };
        self.stopped = decision == Decision::Stop;
        self.log.push(LogRow {
            n,
            energy: e,
            target: self.target,
            decision,
        });
        Ok(decision)
    }

    /// True once `(1 - p̂)^n <= 1 - override_level`, with `p̂` the estimated
    /// probability of a stopping value.
    pub fn override_check(&self) -> bool {
        match (&self.estimate, self.target) {
            (Some(est), Some(target)) => {
                override_fires(est.cdf(target), self.n(), self.config.override_level)
            }
            _ => false,
        }
    }

    fn record(&mut self, e: f64) -> Result<(), ControllerError> {
        self.observations.push(e);
        *self.counts.entry(OrderedFloat(e)).or_insert(0) += 1;
        self.best = self.best.min(e);
        let n = self.observations.len() as f64;
        let delta = e - self.running_mean;
        self.running_mean += delta / n;
        self.running_m2 += delta * (e - self.running_mean);
        if self.config.policy == Policy::BayesDirichlet {
            match &mut self.posterior {
                Some(p) => p.observe_in_place(e)?,
                None => self.posterior = Some(DirichletPosterior::new(vec![e], vec![1.0])?),
            }
        }
        Ok(())
    }

    fn empirical(&self) -> EnergyDistribution {
        let support = self.counts.keys().map(|k| k.0).collect();
        let weights = self.counts.values().map(|&c| c as f64).collect();
        EnergyDistribution::from_unnormalized(support, weights)
            .expect("observations are finite and nonempty")
    }

    fn burn_in_estimate(&self) -> Result<Option<Estimate>, ControllerError> {
        match self.config.policy {
            Policy::GaussianMl => {
                let n = self.n();
                if n < 2 {
                    return Ok(None);
                }
                let var = self.running_m2 / n as f64;
                // A constant stream has no Gaussian fit; its empirical
                // distribution is the degenerate limit.
                Ok(Some(match GaussianParams::new(self.running_mean, var.sqrt()) {
                    Ok(g) if var > 0.0 => Estimate::Gaussian(g),
                    _ => Estimate::Discrete(self.empirical()),
                }))
            }
            Policy::BayesDirichlet => Ok(self
                .posterior
                .as_ref()
                .map(|p| Estimate::Discrete(p.predictive()))),
        }
    }

    /// Empirical body plus GPD tail below `μ_n`, the smallest observed value
    /// with at least `tail_obs` observations strictly below it. `None` when
    /// no such threshold exists or the tail cannot be fitted.
    fn asymptotic_estimate(&mut self) -> Result<Option<Estimate>, ControllerError> {
        let tail_obs = self.config.tail_obs as u64;
        let mut below = 0u64;
        let mut threshold = None;
        for (&value, &count) in &self.counts {
            if below >= tail_obs {
                threshold = Some(value);
                break;
            }
            below += count;
        }
        let Some(mu) = threshold else {
            return Ok(None);
        };
        let key = (mu, below);
        let fit = match &self.tail_cache {
            Some((cached, fit)) if *cached == key => *fit,
            _ => {
                let exceedances: Vec<f64> = self
                    .counts
                    .range(..mu)
                    .flat_map(|(v, &c)| std::iter::repeat_n(mu.0 - v.0, c as usize))
                    .collect();
                let fit = gpd_fit_exceedances(&exceedances)
                    .ok()
                    .and_then(|(scale, shape)| GpdParams::new(scale, shape, mu.0).ok());
                if let Some(g) = &fit {
                    if g.is_heavy_tailed() {
                        log::warn!(
                            "tail fit at n={} has shape {:.3} >= 1",
                            self.n(),
                            g.shape
                        );
                    }
                }
                self.tail_cache = Some((key, fit));
                fit
            }
        };
        let Some(g) = fit else {
            return Ok(None);
        };
        Ok(splice_tail(&self.empirical(), g).ok().map(Estimate::Spliced))
    }
}

pub fn override_fires(p_hat: f64, n: u64, level: f64) -> bool {
    if !(p_hat > 0.0) {
        return false;
    }
    let log_miss = n as f64 * (-p_hat.min(1.0)).ln_1p();
    log_miss <= (1.0 - level).ln()
}

/// Feeds `sampler` into a fresh session until it stops.
pub fn run_session<F>(mut sampler: F, config: SessionConfig) -> Result<SessionState, ControllerError>
where
    F: FnMut() -> f64,
{
    let max = config.max_iterations;
    let mut state = SessionState::new(config)?;
    for _ in 0..max {
        if state.observe(sampler())? == Decision::Stop {
            return Ok(state);
        }
    }
    Err(ControllerError::MaxIterations(max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coin() -> EnergyDistribution {
        EnergyDistribution::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap()
    }

    fn cost(level: f64) -> CostModel {
        CostModel::new(level, 1.0).unwrap()
    }

    fn exact_prior(d: &EnergyDistribution) -> DirichletPosterior {
        DirichletPosterior::from_family(d, 1e6).unwrap()
    }

    #[test]
    fn degenerate_stream_with_matching_prior_stops_at_once() {
        let five = EnergyDistribution::degenerate(5.0).unwrap();
        let config = SessionConfig::new(Policy::BayesDirichlet, cost(0.3)).with_prior(exact_prior(&five));
        let mut s = SessionState::new(config).unwrap();
        assert_eq!(s.observe(5.0).unwrap(), Decision::Stop);
        assert_abs_diff_eq!(s.current_target().unwrap(), 5.3, epsilon = 1e-12);
        assert_abs_diff_eq!(s.realized_cost().unwrap(), 5.3, epsilon = 1e-12);
        assert_eq!(s.observe(5.0), Err(ControllerError::SessionClosed));
    }

    #[test]
    fn gaussian_policy_never_stops_at_first_observation() {
        let mut s = SessionState::new(SessionConfig::new(Policy::GaussianMl, cost(100.0))).unwrap();
        assert_eq!(s.observe(3.0).unwrap(), Decision::Continue);
        assert_eq!(s.current_estimate(), Err(ControllerError::InsufficientData));
        assert_eq!(s.current_target(), None);
        assert_eq!(s.observe(2.0).unwrap(), Decision::Stop);
    }

    #[test]
    fn gaussian_overlay_from_two_points() {
        let mut s = SessionState::new(SessionConfig::new(Policy::GaussianMl, cost(1e-3))).unwrap();
        s.observe(0.0).unwrap();
        s.observe(2.0).unwrap();
        match s.current_estimate().unwrap() {
            Estimate::Gaussian(g) => {
                assert_abs_diff_eq!(g.mean, 1.0, epsilon = 1e-15);
                assert_abs_diff_eq!(g.stddev, 1.0, epsilon = 1e-15);
            }
            other => panic!("unexpected estimate {other:?}"),
        }
    }

    #[test]
    fn exact_prior_stops_at_first_observation_for_large_cost() {
        for first in [0.0, 1.0] {
            let config = SessionConfig::new(Policy::BayesDirichlet, cost(0.6)).with_prior(exact_prior(&coin()));
            let mut s = SessionState::new(config).unwrap();
            assert_eq!(s.observe(first).unwrap(), Decision::Stop);
            assert_abs_diff_eq!(s.current_target().unwrap(), 1.1, epsilon = 1e-6);
        }
    }

    #[test]
    fn family_prior_without_data_is_the_family() {
        let family = EnergyDistribution::new(vec![-2.0, 0.0, 3.0], vec![0.2, 0.3, 0.5]).unwrap();
        let config = SessionConfig::new(Policy::BayesDirichlet, cost(0.1))
            .with_prior(DirichletPosterior::from_family(&family, DEFAULT_PRIOR_STRENGTH).unwrap());
        let s = SessionState::new(config).unwrap();
        let pred = s.posterior_predictive().unwrap();
        assert!(pred.total_variation(&family) < 1e-12);
    }

    #[test]
    fn override_examples() {
        assert!(override_fires(0.5, 7, 0.99));
        assert!(!override_fires(0.5, 6, 0.99));
        assert!(!override_fires(0.0, 1_000_000, 0.99));
    }

    #[test]
    fn threshold_leaves_tail_obs_observations_below() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = SessionState::new(SessionConfig::new(Policy::GaussianMl, cost(1e-9))).unwrap();
        let mut draws: Vec<f64> = (0..600).map(|_| rng.random::<f64>() * 100.0).collect();
        for &e in &draws {
            if s.observe(e).unwrap() == Decision::Stop {
                panic!("tiny cost should not stop");
            }
        }
        draws.sort_by(f64::total_cmp);
        match s.current_estimate().unwrap() {
            Estimate::Spliced(sp) => {
                assert_eq!(sp.threshold(), draws[100]);
                assert_abs_diff_eq!(sp.tail_mass(), 100.0 / 600.0, epsilon = 1e-12);
            }
            other => panic!("unexpected estimate {other:?}"),
        }
        assert_eq!(s.regime(), Regime::Asymptotic);
    }

    #[test]
    fn degenerate_sampler_realized_cost() {
        let config = SessionConfig::new(Policy::BayesDirichlet, cost(0.25));
        let s = run_session(|| -4.0, config).unwrap();
        assert_eq!(s.n(), 1);
        assert_abs_diff_eq!(s.realized_cost().unwrap(), -3.75, epsilon = 1e-12);
        let s = run_session(|| -4.0, SessionConfig::new(Policy::GaussianMl, cost(0.25))).unwrap();
        assert_eq!(s.n(), 2);
        assert_abs_diff_eq!(s.realized_cost().unwrap(), -3.5, epsilon = 1e-12);
    }

    #[test]
    fn sessions_are_deterministic_given_the_sampler_seed() {
        let d = EnergyDistribution::new(vec![-3.0, -1.0, 0.0, 2.0], vec![0.02, 0.18, 0.3, 0.5])
            .unwrap();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let config = SessionConfig::new(Policy::GaussianMl, cost(0.05));
            run_session(|| d.sample(&mut rng), config).unwrap()
        };
        let (a, b) = (run(9), run(9));
        assert_eq!(a.observations(), b.observations());
        assert_eq!(a.realized_cost(), b.realized_cost());
    }

    #[test]
    fn max_iterations_is_enforced() {
        let mut config = SessionConfig::new(Policy::GaussianMl, cost(1e-12));
        config.max_iterations = 50;
        let mut k = 0.0;
        let err = run_session(
            || {
                k += 1.0;
                k
            },
            config,
        )
        .unwrap_err();
        assert_eq!(err, ControllerError::MaxIterations(50));
    }

    #[test]
    fn config_validation() {
        let mut config = SessionConfig::new(Policy::GaussianMl, cost(1.0));
        config.tail_obs = 5;
        assert!(SessionState::new(config.clone()).is_err());
        config.tail_obs = 100;
        config.override_level = 1.0;
        assert!(SessionState::new(config).is_err());
    }

    #[test]
    fn log_rows_track_decisions() {
        let mut s = SessionState::new(SessionConfig::new(Policy::GaussianMl, cost(0.5))).unwrap();
        s.observe(1.0).unwrap();
        s.observe(3.0).unwrap();
        let log = s.log();
        assert_eq!(log[0].target, None);
        assert_eq!(log[0].decision, Decision::Continue);
        assert_eq!(log[1].n, 2);
        assert!(log[1].target.is_some());
    }
}
