use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{IsingInstance, SolverError};

/// Linear temperature schedule, one temperature per sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub t_init: f64,
    pub t_fin: f64,
    pub n_sweeps: u64,
}

impl AnnealSchedule {
    pub const DEFAULT_T_INIT: f64 = 10.0;
    pub const DEFAULT_T_FIN: f64 = 1.0 / 3.0;

    pub fn new(t_init: f64, t_fin: f64, n_sweeps: u64) -> Result<Self, SolverError> {
        let s = Self {
            t_init,
            t_fin,
            n_sweeps,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_sweeps(n_sweeps: u64) -> Self {
        Self {
            t_init: Self::DEFAULT_T_INIT,
            t_fin: Self::DEFAULT_T_FIN,
            n_sweeps,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.t_fin > 0.0 && self.t_init > self.t_fin && self.t_init.is_finite()) {
            return Err(SolverError::InvalidSchedule(format!(
                "need t_init > t_fin > 0, got t_init={}, t_fin={}",
                self.t_init, self.t_fin
            )));
        }
        Ok(())
    }

    /// Temperature of sweep `s`, linear from `t_init` (first sweep) to
    /// `t_fin` (last sweep). A single-sweep schedule runs at `t_fin`.
    pub fn temperature(&self, sweep: u64) -> f64 {
        if self.n_sweeps <= 1 {
            return self.t_fin;
        }
        let frac = sweep as f64 / (self.n_sweeps - 1) as f64;
        self.t_init + (self.t_fin - self.t_init) * frac
    }
}

/// One annealing run. Field order matches the sample archive CSV columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub run_index: u64,
    pub energy: f64,
    pub n_sweeps: u64,
    pub seed: u64,
}

/// Compressed adjacency of an instance, shared by every run on it.
#[derive(Debug, Clone)]
pub struct Adjacency {
    offsets: Vec<usize>,
    neighbors: Vec<(u32, i64)>,
}

impl Adjacency {
    pub fn new(inst: &IsingInstance) -> Self {
        let n = inst.num_vars();
        let mut degree = vec![0usize; n];
        for &(i, j, _) in inst.couplings() {
            degree[i] += 1;
            degree[j] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![(0u32, 0i64); offsets[n]];
        for &(i, j, w) in inst.couplings() {
            neighbors[fill[i]] = (j as u32, w);
            fill[i] += 1;
            neighbors[fill[j]] = (i as u32, w);
            fill[j] += 1;
        }
        Self { offsets, neighbors }
    }

    pub fn num_vars(&self) -> usize {
        self.offsets.len() - 1
    }

    fn row(&self, i: usize) -> &[(u32, i64)] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }
}

/// Single-spin Metropolis dynamics with incrementally maintained local fields.
#[derive(Debug, Clone)]
pub struct Annealer<'a> {
    adj: &'a Adjacency,
    spins: Vec<i8>,
    /// `h_i = Σ_j J_ij s_j`.
    fields: Vec<i64>,
    energy: i64,
}

impl<'a> Annealer<'a> {
    pub fn new(adj: &'a Adjacency, spins: Vec<i8>) -> Result<Self, SolverError> {
        let n = adj.num_vars();
        if spins.len() != n {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                found: spins.len(),
            });
        }
        if let Some((index, &value)) = spins.iter().enumerate().find(|(_, &s)| s != 1 && s != -1) {
            return Err(SolverError::InvalidSpin { index, value });
        }
        let fields: Vec<i64> = (0..n)
            .map(|i| {
                adj.row(i)
                    .iter()
                    .map(|&(j, w)| w * i64::from(spins[j as usize]))
                    .sum()
            })
            .collect();
        let twice: i64 = (0..n).map(|i| i64::from(spins[i]) * fields[i]).sum();
        Ok(Self {
            adj,
            spins,
            fields,
            energy: twice / 2,
        })
    }

    /// Uniformly random initial configuration.
    pub fn random<R: Rng + ?Sized>(adj: &'a Adjacency, rng: &mut R) -> Self {
        let spins = (0..adj.num_vars())
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        Self::new(adj, spins).expect("random spins are valid")
    }

    pub fn energy(&self) -> i64 {
        self.energy
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    /// Metropolis update of spin `i`; returns whether it flipped.
    #[inline]
    pub fn update<R: Rng + ?Sized>(&mut self, i: usize, temperature: f64, rng: &mut R) -> bool {
        let s = i64::from(self.spins[i]);
        let delta = -2 * s * self.fields[i];
        if delta > 0 && rng.random::<f64>() >= (-(delta as f64) / temperature).exp() {
            return false;
        }
        self.flip(i, delta);
        true
    }

    /// Flips spin `i` unconditionally.
    pub(crate) fn force_flip(&mut self, i: usize) {
        let delta = -2 * i64::from(self.spins[i]) * self.fields[i];
        self.flip(i, delta);
    }

    fn flip(&mut self, i: usize, delta: i64) {
        self.spins[i] = -self.spins[i];
        let step = 2 * i64::from(self.spins[i]);
        for &(j, w) in self.adj.row(i) {
            self.fields[j as usize] += w * step;
        }
        self.energy += delta;
    }

    /// One sweep: every spin updated once, in index order.
    pub fn sweep<R: Rng + ?Sized>(&mut self, temperature: f64, rng: &mut R) {
        for i in 0..self.spins.len() {
            self.update(i, temperature, rng);
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `index` in a batch with seed `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

fn run_on(adj: &Adjacency, sched: &AnnealSchedule, seed: u64) -> i64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut annealer = Annealer::random(adj, &mut rng);
    for s in 0..sched.n_sweeps {
        annealer.sweep(sched.temperature(s), &mut rng);
    }
    annealer.energy()
}

/// One annealing run from a random start; reports the final energy.
pub fn sa_run(
    inst: &IsingInstance,
    sched: &AnnealSchedule,
    seed: u64,
) -> Result<SampleRecord, SolverError> {
    sched.validate()?;
    let adj = Adjacency::new(inst);
    Ok(SampleRecord {
        run_index: 0,
        energy: run_on(&adj, sched, seed) as f64,
        n_sweeps: sched.n_sweeps,
        seed,
    })
}

/// `n_runs` independent runs spread over `workers` threads.
///
/// Run `i` is seeded with [`derive_seed`]`(master_seed, i)`, so the output
/// does not depend on the worker count.
pub fn sample_batch(
    inst: &IsingInstance,
    sched: &AnnealSchedule,
    n_runs: u64,
    master_seed: u64,
    workers: usize,
) -> Result<Vec<SampleRecord>, SolverError> {
    sched.validate()?;
    if n_runs == 0 || workers == 0 {
        return Err(SolverError::InvalidArgument(format!(
            "need at least one run and one worker, got runs={n_runs}, workers={workers}"
        )));
    }
    let adj = Adjacency::new(inst);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SolverError::InvalidArgument(e.to_string()))?;
    let records = pool.install(|| {
        (0..n_runs)
            .into_par_iter()
            .map(|run_index| {
                let seed = derive_seed(master_seed, run_index);
                SampleRecord {
                    run_index,
                    energy: run_on(&adj, sched, seed) as f64,
                    n_sweeps: sched.n_sweeps,
                    seed,
                }
            })
            .collect()
    });
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{brute_force_ground_state, energy, generate_complete_instance};

    #[test]
    fn schedule_endpoints() {
        let s = AnnealSchedule::new(10.0, 1.0 / 3.0, 4).unwrap();
        assert_eq!(s.temperature(0), 10.0);
        assert!((s.temperature(3) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(AnnealSchedule::with_sweeps(1).temperature(0), 1.0 / 3.0);
        assert!(AnnealSchedule::new(1.0, 2.0, 3).is_err());
        assert!(AnnealSchedule::new(1.0, 0.0, 3).is_err());
    }

    #[test]
    fn incremental_energy_matches_direct() {
        let inst = generate_complete_instance(30, 4).unwrap();
        let adj = Adjacency::new(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut a = Annealer::random(&adj, &mut rng);
        for s in 0..50 {
            a.sweep(5.0 / (1.0 + s as f64), &mut rng);
            assert_eq!(a.energy(), energy(&inst, a.spins()).unwrap());
        }
    }

    #[test]
    fn zero_sweeps_returns_initial_energy() {
        let inst = generate_complete_instance(20, 5).unwrap();
        let rec = sa_run(&inst, &AnnealSchedule::with_sweeps(0), 77).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let adj = Adjacency::new(&inst);
        let start = Annealer::random(&adj, &mut rng);
        assert_eq!(rec.energy, energy(&inst, start.spins()).unwrap() as f64);
    }

    #[test]
    fn runs_are_seeded() {
        let inst = generate_complete_instance(40, 6).unwrap();
        let sched = AnnealSchedule::with_sweeps(20);
        assert_eq!(sa_run(&inst, &sched, 3).unwrap(), sa_run(&inst, &sched, 3).unwrap());
    }

    #[test]
    fn boltzmann_frequencies_at_fixed_temperature() {
        let inst = IsingInstance::new(2, vec![(0, 1, 1)]).unwrap();
        let adj = Adjacency::new(&inst);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut a = Annealer::new(&adj, vec![1, 1]).unwrap();
        let updates = 1_000_000;
        let mut low = 0u64;
        for k in 0..updates {
            a.update(k % 2, 1.0, &mut rng);
            if a.energy() == -1 {
                low += 1;
            }
        }
        let e = std::f64::consts::E;
        let expected = e / (e + 1.0 / e);
        let observed = low as f64 / updates as f64;
        assert!((observed / expected - 1.0).abs() < 0.01, "{observed} vs {expected}");
    }

    #[test]
    fn finds_ground_state_of_small_instance() {
        let inst = generate_complete_instance(16, 31).unwrap();
        let exact = brute_force_ground_state(&inst).unwrap();
        let sched = AnnealSchedule::with_sweeps(1000);
        let best = sample_batch(&inst, &sched, 1000, 5, 1)
            .unwrap()
            .iter()
            .map(|r| r.energy)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best, exact.e0 as f64);
    }

    #[test]
    fn batch_is_independent_of_workers() {
        let inst = generate_complete_instance(24, 2).unwrap();
        let sched = AnnealSchedule::with_sweeps(10);
        let one = sample_batch(&inst, &sched, 200, 42, 1).unwrap();
        let many = sample_batch(&inst, &sched, 200, 42, 8).unwrap();
        assert_eq!(one, many);
        assert!(one.iter().enumerate().all(|(i, r)| r.run_index == i as u64));
        let single = sample_batch(&inst, &sched, 1, 42, 3).unwrap();
        let direct = sa_run(&inst, &sched, derive_seed(42, 0)).unwrap();
        assert_eq!(single[0], direct);
        assert!(sample_batch(&inst, &sched, 1, 42, 0).is_err());
    }
}
