use serde::{Deserialize, Serialize};

use super::{Adjacency, Annealer, IsingInstance, SolverError};

pub const MAX_BRUTE_FORCE_VARS: usize = 25;

/// Exact low end of the spectrum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundState {
    pub e0: i64,
    /// Lowest energy strictly above `e0`, if any configuration has one.
    pub e1: Option<i64>,
    pub config: Vec<i8>,
}

/// Enumerates all configurations in Gray-code order.
///
/// Spin 0 is held at +1: the Hamiltonian is invariant under a global flip,
/// so that halves the work without losing any energy value.
pub fn brute_force_ground_state(inst: &IsingInstance) -> Result<GroundState, SolverError> {
    let n = inst.num_vars();
    if n > MAX_BRUTE_FORCE_VARS {
        return Err(SolverError::TooLarge(n));
    }
    let adj = Adjacency::new(inst);
    let mut state = Annealer::new(&adj, vec![1; n])?;
    let mut e0 = state.energy();
    let mut e1: Option<i64> = None;
    let mut best = 0u64;
    let mut gray = 0u64;
    for k in 1..1u64 << (n - 1) {
        let bit = k.trailing_zeros() as usize;
        gray ^= 1 << bit;
        state.force_flip(bit + 1);
        let e = state.energy();
        if e < e0 {
            e1 = Some(e0);
            e0 = e;
            best = gray;
        } else if e > e0 && e1.is_none_or(|v| e < v) {
            e1 = Some(e);
        }
    }
    let config = (0..n)
        .map(|i| if i > 0 && best >> (i - 1) & 1 == 1 { -1 } else { 1 })
        .collect();
    Ok(GroundState { e0, e1, config })
}
