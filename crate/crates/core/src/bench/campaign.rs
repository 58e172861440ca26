use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{bootstrap_error_bars, BenchError, BenchmarkConfig, BootstrapRow};
use crate::dist::{build_empirical, EnergyDistribution};
use crate::io;
use crate::solver::{
    brute_force_ground_state, derive_seed, generate_complete_instance, optimize_run_length,
    sample_batch, IsingInstance,
};
use crate::stopping::{split_cost, CostModel};

/// One `(instance, n_sweeps, c)` cell of `stopping.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRow {
    pub instance: usize,
    pub n_sweeps: u64,
    pub unit_cost: f64,
    pub t_run: f64,
    pub c_star: f64,
    pub c_star_minus_e0: Option<f64>,
    pub e_star: f64,
    pub t_star: f64,
    pub n_star: f64,
}

/// One `(instance, c)` row of `envelope.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub instance: usize,
    pub unit_cost: f64,
    pub n_sweeps: u64,
    pub t_run: f64,
    pub c_star: f64,
    pub c_star_minus_e0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct BootstrapCsvRow {
    instance: usize,
    n_sweeps: u64,
    unit_cost: f64,
    mean_c_star: f64,
    std_c_star: f64,
    in_tail: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub instance: usize,
    /// Instance file, or `generated`.
    pub source: String,
    pub num_vars: usize,
    pub e0: Option<f64>,
    pub e1: Option<f64>,
    /// `exact` (exhaustive search) or `best-known` (lowest sampled energies).
    pub e0_source: String,
    /// Distinct energies seen per schedule.
    pub distinct_energies: BTreeMap<u64, usize>,
    /// Mean sampled energy per schedule.
    pub mean_energy: BTreeMap<u64, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub runs: u64,
    pub t_per_sweep: f64,
    pub unit_costs: Vec<f64>,
    pub instances: Vec<InstanceSummary>,
    #[serde(skip)]
    pub stopping: Vec<StoppingRow>,
    #[serde(skip)]
    pub envelope: Vec<EnvelopeRow>,
    #[serde(skip)]
    pub bootstrap: Vec<(usize, u64, BootstrapRow)>,
    /// Sampled energy distributions per instance and schedule.
    #[serde(skip)]
    pub distributions: Vec<BTreeMap<u64, EnergyDistribution>>,
}

fn load_instances(config: &BenchmarkConfig) -> Result<Vec<(String, IsingInstance)>, BenchError> {
    let mut out = Vec::new();
    for path in &config.instances {
        out.push((path.display().to_string(), io::read_instance(path)?));
    }
    if let Some(g) = &config.generate {
        for k in 0..g.count {
            let inst = generate_complete_instance(g.num_vars, derive_seed(g.seed, k as u64))?;
            out.push(("generated".to_string(), inst));
        }
    }
    Ok(out)
}

/// Runs the campaign and writes every report under `config.output_dir`:
///
/// - `instances/instance_<k>.json`
/// - `samples/instance_<k>_sweeps_<n>.csv` (sample archive)
/// - `stopping.csv`, `envelope.csv`, optionally `bootstrap.csv`
/// - `summary.json`
///
/// Outputs depend only on the config and `seed`, never on `workers`.
pub fn run_benchmark(
    config: &BenchmarkConfig,
    seed: u64,
    workers: usize,
) -> Result<BenchReport, BenchError> {
    config.validate()?;
    if workers == 0 {
        return Err(BenchError::Config("workers must be >= 1".into()));
    }
    let out = config.output_dir.as_path();
    let grid = config.c_grid.values();
    let schedules = config.schedules();
    let instances = load_instances(config)?;

    let mut report = BenchReport {
        seed,
        runs: config.runs,
        t_per_sweep: config.t_per_sweep,
        unit_costs: grid.clone(),
        instances: Vec::new(),
        stopping: Vec::new(),
        envelope: Vec::new(),
        bootstrap: Vec::new(),
        distributions: Vec::new(),
    };

    for (k, (source, inst)) in instances.iter().enumerate() {
        io::write_instance(&out.join(format!("instances/instance_{k}.json")), inst)?;
        let instance_seed = derive_seed(seed, k as u64);
        let mut samples = BTreeMap::new();
        for sched in &schedules {
            log::info!("instance {k}: {} runs at {} sweeps", config.runs, sched.n_sweeps);
            let records = sample_batch(
                inst,
                sched,
                config.runs,
                derive_seed(instance_seed, sched.n_sweeps),
                workers,
            )?;
            io::write_sample_archive(
                &out.join(format!("samples/instance_{k}_sweeps_{}.csv", sched.n_sweeps)),
                &records,
            )?;
            let energies: Vec<f64> = records.iter().map(|r| r.energy).collect();
            samples.insert(sched.n_sweeps, energies);
        }
        let curves: BTreeMap<u64, EnergyDistribution> = samples
            .iter()
            .map(|(&n, e)| Ok((n, build_empirical(e)?)))
            .collect::<Result<_, BenchError>>()?;

        let (e0, e1, e0_source) = if inst.num_vars() <= config.brute_force_max_vars {
            let g = brute_force_ground_state(inst)?;
            (Some(g.e0 as f64), g.e1.map(|v| v as f64), "exact")
        } else {
            let mut seen: Vec<f64> = curves.values().flat_map(|d| d.support().to_vec()).collect();
            seen.sort_by(f64::total_cmp);
            seen.dedup();
            (seen.first().copied(), seen.get(1).copied(), "best-known")
        };
        let shift = |c: f64| e0.map(|e| c - e);

        for (&n_sweeps, d) in &curves {
            let t_run = n_sweeps as f64 * config.t_per_sweep;
            for &c in &grid {
                let s = split_cost(d, &CostModel::new(c, t_run)?)?;
                report.stopping.push(StoppingRow {
                    instance: k,
                    n_sweeps,
                    unit_cost: c,
                    t_run,
                    c_star: s.optimal_cost,
                    c_star_minus_e0: shift(s.optimal_cost),
                    e_star: s.optimal_energy,
                    t_star: s.optimal_effort,
                    n_star: s.mean_stop_step,
                });
            }
            if let Some(b) = &config.bootstrap {
                let rows = bootstrap_error_bars(
                    &samples[&n_sweeps],
                    b.replicates,
                    b.tail_percent,
                    &grid,
                    t_run,
                    derive_seed(instance_seed, n_sweeps ^ 0xB007),
                )?;
                report.bootstrap.extend(rows.into_iter().map(|r| (k, n_sweeps, r)));
            }
        }

        for p in optimize_run_length(&curves, &grid, config.t_per_sweep)? {
            report.envelope.push(EnvelopeRow {
                instance: k,
                unit_cost: p.unit_cost,
                n_sweeps: p.n_sweeps,
                t_run: p.n_sweeps as f64 * config.t_per_sweep,
                c_star: p.optimal_cost,
                c_star_minus_e0: shift(p.optimal_cost),
            });
        }

        report.instances.push(InstanceSummary {
            instance: k,
            source: source.clone(),
            num_vars: inst.num_vars(),
            e0,
            e1,
            e0_source: e0_source.to_string(),
            distinct_energies: curves.iter().map(|(&n, d)| (n, d.len())).collect(),
            mean_energy: curves.iter().map(|(&n, d)| (n, d.mean())).collect(),
        });
        report.distributions.push(curves);
    }

    write_reports(out, &report)?;
    Ok(report)
}

fn write_reports(out: &Path, report: &BenchReport) -> Result<(), BenchError> {
    io::write_csv(&out.join("stopping.csv"), &report.stopping)?;
    io::write_csv(&out.join("envelope.csv"), &report.envelope)?;
    if !report.bootstrap.is_empty() {
        let rows: Vec<BootstrapCsvRow> = report
            .bootstrap
            .iter()
            .map(|&(instance, n_sweeps, row)| BootstrapCsvRow {
                instance,
                n_sweeps,
                unit_cost: row.unit_cost,
                mean_c_star: row.mean_c_star,
                std_c_star: row.std_c_star,
                in_tail: row.in_tail,
            })
            .collect();
        io::write_csv(&out.join("bootstrap.csv"), &rows)?;
    }
    io::write_json(&out.join("summary.json"), report)?;
    Ok(())
}
