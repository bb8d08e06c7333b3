//! Hierarchical, path-addressed random streams.
//!
//! Every random decision in a run is drawn from a stream identified by the
//! master seed plus a short path such as `(generation, stage, genome_index)`.
//! Because a stream depends only on its address, per-genome work can run in
//! any order (or on any number of threads) and still consume exactly the same
//! random numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stage tags used as the second path component inside a generation.
pub mod stage {
    pub const INIT: u64 = 1;
    pub const REPRODUCE: u64 = 2;
    pub const MUTATE: u64 = 3;
    pub const CROSSOVER: u64 = 4;
    pub const SPECIATE: u64 = 5;
    pub const EVALUATE: u64 = 6;
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    master_seed: u64,
    path: Vec<u64>,
}

fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: Vec::new(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Stream one level deeper in the hierarchy.
    pub fn child(&self, component: u64) -> Self {
        let mut path = self.path.clone();
        path.push(component);
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    pub fn descend(&self, components: &[u64]) -> Self {
        let mut path = self.path.clone();
        path.extend_from_slice(components);
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    /// 256-bit generator seed derived from (seed, path). Each path component
    /// is folded in with its depth so `[a, b]` and `[b, a]` differ.
    fn seed_bytes(&self) -> [u8; 32] {
        let mut state = mix64(self.master_seed);
        for (depth, &c) in self.path.iter().enumerate() {
            state = mix64(state ^ mix64(c ^ ((depth as u64 + 1) << 56)));
        }
        let mut seed = [0u8; 32];
        for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
            state = mix64(state.wrapping_add(i as u64));
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        seed
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.seed_bytes())
    }
}
