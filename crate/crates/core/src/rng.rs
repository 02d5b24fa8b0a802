//! Reproducible random-number streams.
//!
//! Every Monte-Carlo consumer receives its own ChaCha stream derived from a
//! master seed and a path of indices (scenario, replicate, purpose, ...).
//! Derivation is a keyed hash, so adding scenarios or running replicates on
//! different worker counts never perturbs other streams.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Deterministic stream generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(master_seed: u64) -> Self {
        StreamKey(splitmix(master_seed ^ 0x9e37_79b9_7f4a_7c15))
    }

    /// Child key for one component of the derivation path.
    pub fn child(self, index: u64) -> Self {
        StreamKey(splitmix(self.0 ^ splitmix(index.wrapping_add(0x2545_f491_4f6c_dd1d))))
    }

    /// Materialize the key as an independent ChaCha stream.
    pub fn rng(self) -> ChaCha12Rng {
        let mut seed = [0u8; 32];
        let mut state = self.0;
        for chunk in seed.chunks_exact_mut(8) {
            state = splitmix(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha12Rng::from_seed(seed)
    }
}

/// Convenience: derive an rng from a master seed and a path of indices.
pub fn stream(master_seed: u64, path: &[u64]) -> ChaCha12Rng {
    let mut key = StreamKey::new(master_seed);
    for &p in path {
        key = key.child(p);
    }
    key.rng()
}

/// Derive a child seed for a sub-experiment (for example, one grid point of a
/// sample-size search) so sibling sub-experiments never share streams.
pub fn derive_seed(master_seed: u64, path: &[u64]) -> u64 {
    let mut key = StreamKey::new(master_seed);
    for &p in path {
        key = key.child(p);
    }
    key.0
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
