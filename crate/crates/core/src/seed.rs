//! Deterministic seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a stream index.
pub fn mix(seed: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ stream.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Seed for `(master, task, replicate)`.
pub fn task_seed(master: u64, task: u64, replicate: u64) -> u64 {
    mix(mix(master, task), replicate)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn streams_are_distinct() {
        let seeds: HashSet<u64> = (0..1000).map(|i| mix(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(task_seed(1, 2, 3), task_seed(1, 3, 2));
        assert_eq!(task_seed(1, 2, 3), task_seed(1, 2, 3));
    }
}
