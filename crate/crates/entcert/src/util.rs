//! Small shared utilities: deterministic per-task RNG streams and a
//! data-parallel map that falls back to a sequential implementation when the
//! `parallel` feature is disabled.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derive an independent, reproducible RNG for task `stream` of a run seeded
/// with `seed`.
///
/// Every parallel task (shot, bootstrap replica, disorder realization, sweep
/// point) draws from its own stream, so results are independent of scheduling
/// order and thread count.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Map `f` over `0..n`, collecting results in index order.
///
/// Runs on the rayon pool when the `parallel` feature is enabled (the
/// default), and as a plain sequential loop otherwise. `f` must be
/// deterministic given its index for the two paths to agree.
#[cfg(feature = "parallel")]
pub fn par_map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Sequential fallback of [`par_map_indexed`].
#[cfg(not(feature = "parallel"))]
pub fn par_map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sum `f(i)` over `0..n` into an accumulator via `merge`, in parallel when
/// available.
pub fn par_sum_with<T, F, M>(n: usize, f: F, zero: T, merge: M) -> T
where
    T: Send + Clone + Sync,
    F: Fn(usize) -> T + Sync + Send,
    M: Fn(T, T) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(f)
            .reduce(|| zero.clone(), &merge)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).fold(zero, merge)
    }
}
