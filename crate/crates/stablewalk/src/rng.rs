//! Counter-based random streams.
//!
//! Every random draw in the crate is keyed by (seed, path, step, role).
//! The key is hashed into a ChaCha8 seed, so any logical draw can be
//! reproduced in isolation and the result of a simulation does not depend
//! on how paths are scheduled across worker threads. Summing the fine-step
//! noise of a path gives the coarse-step noise of the same path, which is
//! what the common-random-number ladders in the rate studies rely on.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is consumed for. Distinct roles at the same (path, step)
/// are independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Positive stable subordinator draw inside an increment.
    Subordinator,
    /// Gaussian factor of a subordinated increment (or the Brownian case).
    Gaussian,
    /// The uniform evaluation time U_k of a randomized drift step.
    TimeShuffle,
    /// Forward sub-step noise used by path interpolation.
    Bridge,
    /// Anything cell-level: one stream per experiment cell.
    Cell,
}

impl Role {
    fn tag(self) -> u64 {
        match self {
            Role::Subordinator => 0x5354_4142_4c45_0001,
            Role::Gaussian => 0x5354_4142_4c45_0002,
            Role::TimeShuffle => 0x5354_4142_4c45_0003,
            Role::Bridge => 0x5354_4142_4c45_0004,
            Role::Cell => 0x5354_4142_4c45_0005,
        }
    }
}

/// splitmix64 step; the standard finalizer is a solid mixer for building
/// independent seeds out of structured counters.
fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic stream for one logical draw site.
pub fn stream(seed: u64, path: u64, step: u64, role: Role) -> ChaCha8Rng {
    let mut state = seed
        ^ path.wrapping_mul(0xa076_1d64_78bd_642f)
        ^ step.wrapping_mul(0xe703_7ed1_a0b4_28db)
        ^ role.tag();
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Derived seed for a named experiment cell (records go into manifests).
pub fn cell_seed(seed: u64, cell: &str) -> u64 {
    let mut state = seed;
    for b in cell.as_bytes() {
        state ^= u64::from(*b);
        splitmix(&mut state);
    }
    splitmix(&mut state)
}
