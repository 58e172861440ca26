use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SolverError;

/// Largest coupling magnitude drawn by [`generate_complete_instance`].
pub const MAX_COUPLING: i64 = 10;

/// `(i, j, J_ij)` with `i < j`.
pub type Coupling = (usize, usize, i64);

/// Ising Hamiltonian `H(s) = Σ_{i<j} J_ij s_i s_j` over an arbitrary edge list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct IsingInstance {
    num_vars: usize,
    couplings: Vec<Coupling>,
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    num_vars: usize,
    couplings: Vec<Coupling>,
}

impl TryFrom<RawInstance> for IsingInstance {
    type Error = SolverError;

    fn try_from(raw: RawInstance) -> Result<Self, SolverError> {
        IsingInstance::new(raw.num_vars, raw.couplings)
    }
}

impl From<IsingInstance> for RawInstance {
    fn from(inst: IsingInstance) -> Self {
        RawInstance {
            num_vars: inst.num_vars,
            couplings: inst.couplings,
        }
    }
}

impl IsingInstance {
    /// Validates the edge list. Pairs given as `(j, i)` are reordered.
    pub fn new(num_vars: usize, couplings: Vec<Coupling>) -> Result<Self, SolverError> {
        if num_vars == 0 {
            return Err(SolverError::InvalidSize(0));
        }
        let mut seen = std::collections::HashSet::with_capacity(couplings.len());
        let mut ordered = Vec::with_capacity(couplings.len());
        for (i, j, w) in couplings {
            let (i, j) = if i < j { (i, j) } else { (j, i) };
            if i == j || j >= num_vars {
                return Err(SolverError::InvalidInstance(format!(
                    "coupling ({i}, {j}) is not a pair of distinct variables below {num_vars}"
                )));
            }
            if w == 0 {
                return Err(SolverError::InvalidInstance(format!(
                    "coupling ({i}, {j}) is zero"
                )));
            }
            if !seen.insert((i, j)) {
                return Err(SolverError::InvalidInstance(format!(
                    "duplicate coupling ({i}, {j})"
                )));
            }
            ordered.push((i, j, w));
        }
        Ok(Self {
            num_vars,
            couplings: ordered,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    /// Sum of `|J_ij|`; bounds `|H|` from above.
    pub fn coupling_norm(&self) -> i64 {
        self.couplings.iter().map(|c| c.2.abs()).sum()
    }
}

/// Complete graph on `n` spins with every `J_ij` uniform over `±{1..10}`.
pub fn generate_complete_instance(n: usize, seed: u64) -> Result<IsingInstance, SolverError> {
    if n < 2 {
        return Err(SolverError::InvalidSize(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut couplings = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let magnitude = rng.random_range(1..=MAX_COUPLING);
            let w = if rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            };
            couplings.push((i, j, w));
        }
    }
    Ok(IsingInstance {
        num_vars: n,
        couplings,
    })
}

pub fn energy(inst: &IsingInstance, spins: &[i8]) -> Result<i64, SolverError> {
    if spins.len() != inst.num_vars {
        return Err(SolverError::DimensionMismatch {
            expected: inst.num_vars,
            found: spins.len(),
        });
    }
    if let Some((index, &value)) = spins.iter().enumerate().find(|(_, &s)| s != 1 && s != -1) {
        return Err(SolverError::InvalidSpin { index, value });
    }
    Ok(inst
        .couplings
        .iter()
        .map(|&(i, j, w)| w * i64::from(spins[i]) * i64::from(spins[j]))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_counts() {
        let two = generate_complete_instance(2, 1).unwrap();
        assert_eq!(two.couplings().len(), 1);
        let w = two.couplings()[0].2;
        assert!(w != 0 && w.abs() <= MAX_COUPLING);
        assert_eq!(generate_complete_instance(100, 1).unwrap().couplings().len(), 4950);
        assert_eq!(generate_complete_instance(1, 1), Err(SolverError::InvalidSize(1)));
    }

    #[test]
    fn generation_is_seeded() {
        assert_eq!(
            generate_complete_instance(30, 9).unwrap(),
            generate_complete_instance(30, 9).unwrap()
        );
        assert_ne!(
            generate_complete_instance(30, 9).unwrap(),
            generate_complete_instance(30, 10).unwrap()
        );
    }

    #[test]
    fn coupling_values_are_uniform() {
        // 448 spins give 100128 couplings, 20 equiprobable values.
        let inst = generate_complete_instance(448, 2024).unwrap();
        let mut counts = [0u64; 20];
        for &(_, _, w) in inst.couplings() {
            let slot = if w > 0 { w + 9 } else { w + 10 };
            counts[slot as usize] += 1;
        }
        let total = inst.couplings().len() as f64;
        let expected = total / 20.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 99th percentile of χ² with 19 degrees of freedom.
        assert!(chi2 < 36.191, "chi2 = {chi2}");
    }

    #[test]
    fn energy_examples() {
        let inst = IsingInstance::new(2, vec![(0, 1, 3)]).unwrap();
        assert_eq!(energy(&inst, &[1, 1]).unwrap(), 3);
        assert_eq!(energy(&inst, &[1, -1]).unwrap(), -3);
        assert_eq!(energy(&inst, &[-1, -1]).unwrap(), 3);
        assert!(matches!(
            energy(&inst, &[1]),
            Err(SolverError::DimensionMismatch { .. })
        ));
        assert_eq!(
            energy(&inst, &[1, 0]),
            Err(SolverError::InvalidSpin { index: 1, value: 0 })
        );
    }

    #[test]
    fn global_flip_symmetry() {
        let inst = generate_complete_instance(12, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let s: Vec<i8> = (0..12).map(|_| if rng.random() { 1 } else { -1 }).collect();
            let flipped: Vec<i8> = s.iter().map(|x| -x).collect();
            assert_eq!(energy(&inst, &s).unwrap(), energy(&inst, &flipped).unwrap());
        }
    }

    #[test]
    fn validation() {
        assert!(IsingInstance::new(3, vec![(0, 3, 1)]).is_err());
        assert!(IsingInstance::new(3, vec![(1, 1, 1)]).is_err());
        assert!(IsingInstance::new(3, vec![(0, 1, 0)]).is_err());
        assert!(IsingInstance::new(3, vec![(0, 1, 2), (1, 0, 2)]).is_err());
        let inst = IsingInstance::new(3, vec![(2, 0, -4)]).unwrap();
        assert_eq!(inst.couplings(), &[(0, 2, -4)]);
    }

    #[test]
    fn json_shape() {
        let inst = IsingInstance::new(3, vec![(0, 1, 2), (1, 2, -5)]).unwrap();
        let text = serde_json::to_string(&inst).unwrap();
        assert_eq!(text, r#"{"num_vars":3,"couplings":[[0,1,2],[1,2,-5]]}"#);
        let back: IsingInstance = serde_json::from_str(&text).unwrap();
        assert_eq!(back, inst);
        assert!(serde_json::from_str::<IsingInstance>(r#"{"num_vars":2,"couplings":[[0,5,1]]}"#)
            .is_err());
    }
}
