//! Fan-out helpers for the embarrassingly parallel inner loops: Monte Carlo
//! mask draws, per-mask forward passes, sweep cells.
//!
//! With the `parallel` feature (on by default) work is spread across the
//! rayon pool; without it everything runs on the calling thread. Results
//! come back in index order either way, so outputs are identical across
//! modes and thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Sequential twin of [`map_collect`]; the benchmark baseline.
pub fn map_collect_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
