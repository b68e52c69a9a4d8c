//! Counter-based seed derivation so every stream of every replication is
//! reproducible from one base seed.

use rand::SeedableRng;

use crate::SimRng;

/// Named random streams of one run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Env = 1,
    Policy = 2,
    Shuffle = 3,
    Init = 4,
    Eval = 5,
    Oracle = 6,
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `stream` of replication `index` under `base`.
pub fn derive_seed(base: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ stream as u64) ^ index)
}

pub fn stream_rng(base: u64, stream: Stream, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, stream, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn known_splitmix_output() {
        // first output of the reference generator seeded with 0
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn streams_and_indices_are_distinct() {
        let mut seen = HashSet::new();
        for s in [Stream::Env, Stream::Policy, Stream::Shuffle, Stream::Init, Stream::Eval, Stream::Oracle] {
            for i in 0..100 {
                assert!(seen.insert(derive_seed(42, s, i)));
            }
        }
    }
}
