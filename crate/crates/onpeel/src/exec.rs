//! Batch execution of independent Monte Carlo tasks.
//!
//! `batch_map` evaluates `f(0..n)` where each call owns its index-derived
//! random stream. With the `parallel` feature (default) the work is spread
//! over the rayon pool; the sequential fallback produces bit-identical
//! output because results are collected by index and reduced in order.

/// Evaluate `f` at every index in `0..n`, in parallel when available.
pub fn batch_map<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        batch_map_seq(n, f)
    }
}

/// Sequential evaluation; also the reference path the benchmarks compare
/// against.
pub fn batch_map_seq<T, F>(n: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_serial_agree() {
        let f = |i: u64| crate::rng::splitmix64(i) as f64;
        assert_eq!(batch_map(1000, f), batch_map_seq(1000, f));
    }
}
