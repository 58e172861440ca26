use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::solver::{AnnealSchedule, MAX_BRUTE_FORCE_VARS};

/// Campaign description, read from JSON.
///
/// `seed` and `workers` may also come from the command line, which wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    /// Instance files to benchmark.
    #[serde(default)]
    pub instances: Vec<PathBuf>,
    /// Complete-graph instances to generate in addition to `instances`.
    #[serde(default)]
    pub generate: Option<GeneratorSpec>,
    pub schedule: ScheduleGrid,
    pub runs: u64,
    pub c_grid: CostGrid,
    /// Time of one sweep; a run with `n` sweeps costs `n·t_per_sweep`.
    #[serde(default = "default_t_per_sweep")]
    pub t_per_sweep: f64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub bootstrap: Option<BootstrapConfig>,
    /// Largest instance whose `E0` and `E1` are found by exhaustive search.
    /// Larger instances use the best energies seen in the campaign.
    #[serde(default = "default_brute_force_max")]
    pub brute_force_max_vars: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub num_vars: usize,
    #[serde(default = "default_count")]
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleGrid {
    #[serde(default = "default_t_init")]
    pub t_init: f64,
    #[serde(default = "default_t_fin")]
    pub t_fin: f64,
    pub sweeps: Vec<u64>,
}

/// Log-spaced unit costs from `min` to `max` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostGrid {
    pub min: f64,
    pub max: f64,
    #[serde(default = "default_points_per_decade")]
    pub points_per_decade: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Lower-tail share modelled by the GPD, in percent.
    #[serde(default = "default_tail_percent")]
    pub tail_percent: f64,
}

fn default_t_per_sweep() -> f64 {
    1.0
}
fn default_brute_force_max() -> usize {
    20
}
fn default_count() -> usize {
    1
}
fn default_t_init() -> f64 {
    AnnealSchedule::DEFAULT_T_INIT
}
fn default_t_fin() -> f64 {
    AnnealSchedule::DEFAULT_T_FIN
}
fn default_points_per_decade() -> u32 {
    25
}
fn default_replicates() -> usize {
    1000
}
fn default_tail_percent() -> f64 {
    0.1
}

impl CostGrid {
    pub fn values(&self) -> Vec<f64> {
        log_grid(self.min, self.max, self.points_per_decade)
    }
}

/// `points_per_decade` points per factor of ten, endpoints included.
pub fn log_grid(min: f64, max: f64, points_per_decade: u32) -> Vec<f64> {
    if min == max {
        return vec![min];
    }
    let (lo, hi) = (min.log10(), max.log10());
    let steps = ((hi - lo) * points_per_decade as f64).round().max(1.0) as usize;
    (0..=steps)
        .map(|i| {
            if i == steps {
                max
            } else {
                10f64.powf(lo + (hi - lo) * i as f64 / steps as f64)
            }
        })
        .collect()
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |msg: String| Err(BenchError::Config(msg));
        if self.instances.is_empty() && self.generate.is_none() {
            return fail("no instances given and no generator configured".into());
        }
        if let Some(g) = &self.generate {
            if g.num_vars < 2 || g.count == 0 {
                return fail(format!(
                    "generator needs num_vars >= 2 and count >= 1, got {} and {}",
                    g.num_vars, g.count
                ));
            }
        }
        if self.runs == 0 {
            return fail("runs must be >= 1".into());
        }
        if self.schedule.sweeps.is_empty() || self.schedule.sweeps.contains(&0) {
            return fail("schedule.sweeps must be a nonempty list of positive counts".into());
        }
        AnnealSchedule::new(self.schedule.t_init, self.schedule.t_fin, 1)
            .map_err(|e| BenchError::Config(e.to_string()))?;
        let g = &self.c_grid;
        if !(g.min > 0.0 && g.max >= g.min && g.max.is_finite()) || g.points_per_decade == 0 {
            return fail(format!(
                "c_grid needs 0 < min <= max and points_per_decade >= 1, got {g:?}"
            ));
        }
        if !(self.t_per_sweep > 0.0 && self.t_per_sweep.is_finite()) {
            return fail(format!("t_per_sweep must be positive, got {}", self.t_per_sweep));
        }
        if let Some(b) = &self.bootstrap {
            if b.replicates < 2 || !(b.tail_percent > 0.0 && b.tail_percent < 100.0) {
                return fail(format!(
                    "bootstrap needs replicates >= 2 and 0 < tail_percent < 100, got {b:?}"
                ));
            }
        }
        if self.brute_force_max_vars > MAX_BRUTE_FORCE_VARS {
            return fail(format!(
                "brute_force_max_vars is capped at {MAX_BRUTE_FORCE_VARS}"
            ));
        }
        if self.workers == Some(0) {
            return fail("workers must be >= 1".into());
        }
        Ok(())
    }

    /// Schedules in ascending sweep order, duplicates removed.
    pub fn schedules(&self) -> Vec<AnnealSchedule> {
        let mut sweeps = self.schedule.sweeps.clone();
        sweeps.sort_unstable();
        sweeps.dedup();
        sweeps
            .into_iter()
            .map(|n| AnnealSchedule {
                t_init: self.schedule.t_init,
                t_fin: self.schedule.t_fin,
                n_sweeps: n,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_requested_density() {
        let g = log_grid(1e-2, 1e2, 25);
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 1e-2);
        assert_eq!(g[100], 1e2);
        assert!((g[25] - 1e-1).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(log_grid(0.5, 0.5, 25), vec![0.5]);
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let text = r#"{
            "generate": {"num_vars": 20, "seed": 3},
            "schedule": {"sweeps": [10, 100]},
            "runs": 50,
            "c_grid": {"min": 0.01, "max": 1},
            "output_dir": "out"
        }"#;
        let c: BenchmarkConfig = serde_json::from_str(text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.c_grid.points_per_decade, 25);
        assert_eq!(c.schedule.t_init, 10.0);
        assert_eq!(c.brute_force_max_vars, 20);
        assert_eq!(c.schedules().len(), 2);
    }

    #[test]
    fn invalid_configs() {
        let text = r#"{"generate": {"num_vars": 20, "seed": 3}, "schedule": {"sweeps": [10]},
            "runs": 0, "c_grid": {"min": 0.01, "max": 1}, "output_dir": "out"}"#;
        let c: BenchmarkConfig = serde_json::from_str(text).unwrap();
        assert!(matches!(c.validate(), Err(BenchError::Config(_))));
        let unknown = r#"{"schedule": {"sweeps": [10]}, "runs": 1, "bogus": 1,
            "c_grid": {"min": 0.01, "max": 1}, "output_dir": "out"}"#;
        assert!(serde_json::from_str::<BenchmarkConfig>(unknown).is_err());
    }
}
