//! Seeded substreams.
//!
//! All randomness in the crate flows from a single root seed through named
//! substreams, so any stage (a design draw, a noise draw, one trial of a
//! sweep) can be reproduced in isolation. Names are hashed with FNV-1a,
//! which is stable across platforms and Rust versions.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed.wrapping_mul(0x9e3779b97f4a7c15);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// RNG for the substream `name` of the stream rooted at `seed`.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(fnv1a(seed, name.as_bytes()))
}

/// RNG for the `index`-th draw of a named substream.
///
/// `(seed, name, index)` fully determines the stream, which is what makes
/// Monte-Carlo loops embarrassingly parallel with deterministic merges.
pub fn substream_indexed(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    let h = fnv1a(seed, name.as_bytes());
    ChaCha8Rng::seed_from_u64(h ^ index.wrapping_mul(0xd1342543de82ef95).rotate_left(17))
}

/// Derive a child seed; used where an API hands out seeds rather than RNGs.
pub fn child_seed(seed: u64, name: &str) -> u64 {
    fnv1a(seed, name.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_deterministic_and_distinct() {
        let a: u64 = substream(7, "pivot").random();
        let b: u64 = substream(7, "pivot").random();
        let c: u64 = substream(7, "step").random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn indexed_substreams_differ_by_index() {
        let a: u64 = substream_indexed(7, "trial", 0).random();
        let b: u64 = substream_indexed(7, "trial", 1).random();
        assert_ne!(a, b);
    }
}
