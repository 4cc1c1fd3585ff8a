//! Deterministic stream derivation.
//!
//! Every random decision in the crate draws from a ChaCha8 stream keyed by
//! `(seed, tags…)` through a splitmix64 chain. Consumers that need
//! independent substreams (one per mask row, per epoch, per sweep cell)
//! derive them by tag instead of sharing a generator, so the number of
//! draws one consumer makes never shifts another consumer's values.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 step (Steele et al. constants).
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Collapses `(seed, tags…)` into a single 64-bit value.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut state = seed;
    let mut out = splitmix64(&mut state);
    for &tag in tags {
        state ^= tag;
        out = splitmix64(&mut state);
    }
    out
}

/// A ChaCha8 stream keyed by `(seed, tags…)`.
pub fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = derive_seed(seed, tags);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Uniform random M-subset of `0..w` via partial Fisher-Yates, O(w).
pub fn uniform_subset(rng: &mut ChaCha8Rng, w: usize, m: usize) -> Vec<usize> {
    debug_assert!(m <= w);
    let mut idx: Vec<usize> = (0..w).collect();
    for i in 0..m {
        let j = rng.random_range(i..w);
        idx.swap(i, j);
    }
    idx.truncate(m);
    idx
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut ChaCha8Rng, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Standard normal draw via Box-Muller (cosine branch only).
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // u1 in (0, 1] so the log is finite.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn streams_are_reproducible() {
        let a: Vec<u64> = {
            let mut r = stream(7, &[1, 2]);
            (0..8).map(|_| r.random()).collect()
        };
        let b: Vec<u64> = {
            let mut r = stream(7, &[1, 2]);
            (0..8).map(|_| r.random()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn tags_change_the_stream() {
        let mut a = stream(7, &[1, 2]);
        let mut b = stream(7, &[1, 3]);
        let xs: Vec<u64> = (0..4).map(|_| a.random()).collect();
        let ys: Vec<u64> = (0..4).map(|_| b.random()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn uniform_subset_has_distinct_members_in_range() {
        let mut rng = stream(0, &[]);
        for _ in 0..100 {
            let picked = uniform_subset(&mut rng, 17, 6);
            assert_eq!(picked.len(), 6);
            let set: HashSet<usize> = picked.iter().copied().collect();
            assert_eq!(set.len(), 6);
            assert!(picked.iter().all(|&p| p < 17));
        }
    }

    #[test]
    fn subset_of_full_width_is_everything() {
        let mut rng = stream(3, &[]);
        let mut picked = uniform_subset(&mut rng, 5, 5);
        picked.sort_unstable();
        assert_eq!(picked, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn normal_draws_have_near_zero_mean() {
        let mut rng = stream(11, &[]);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| standard_normal(&mut rng)).sum::<f64>() / n as f64;
        // 3 sigma / sqrt(n)
        assert!(mean.abs() < 3.0 / (n as f64).sqrt(), "mean {mean}");
    }
}
