//! Batch execution helpers.
//!
//! Independent jobs (the 2^m probe batch, sweep points, grid-point recovery)
//! run through [`run_batch`], which is data-parallel when the `parallel`
//! feature is enabled and falls back to a plain sequential loop otherwise.
//! Results always come back in input order so downstream reductions are
//! deterministic regardless of scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `items`, preserving input order in the output.
#[cfg(feature = "parallel")]
pub fn run_batch<I, O, F>(items: Vec<I>, f: F) -> Vec<O>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync + Send,
{
    items.into_par_iter().map(f).collect()
}

/// Map `f` over `items`, preserving input order in the output.
#[cfg(not(feature = "parallel"))]
pub fn run_batch<I, O, F>(items: Vec<I>, f: F) -> Vec<O>
where
    I: Send,
    O: Send,
    F: Fn(I) -> O + Sync + Send,
{
    items.into_iter().map(f).collect()
}

/// Sequential reference implementation, available under every feature set.
/// Benches compare this against [`run_batch`].
pub fn run_batch_seq<I, O, F>(items: Vec<I>, f: F) -> Vec<O>
where
    F: Fn(I) -> O,
{
    items.into_iter().map(f).collect()
}

/// Configure the global worker count. `jobs = 0` keeps the default.
/// A no-op in sequential builds.
pub fn configure_jobs(jobs: usize) {
    #[cfg(feature = "parallel")]
    {
        if jobs > 0 {
            // Ignore the error if a pool was already installed.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_preserves_order() {
        let items: Vec<u64> = (0..64).collect();
        let out = run_batch(items.clone(), |i| i * i);
        let expected: Vec<u64> = items.iter().map(|i| i * i).collect();
        assert_eq!(out, expected);
    }

    #[test]
    fn sequential_fallback_agrees() {
        let items: Vec<u64> = (0..64).collect();
        let a = run_batch(items.clone(), |i| i.wrapping_mul(0x9e37_79b9));
        let b = run_batch_seq(items, |i| i.wrapping_mul(0x9e37_79b9));
        assert_eq!(a, b);
    }
}
