//! Indexed fan-out helpers for embarrassingly parallel workloads.
//!
//! Results come back in input order regardless of scheduling, so aggregation
//! downstream is deterministic. With the `parallel` feature disabled the
//! parallel entry point degrades to the sequential one.

/// Sequential map over an index range.
pub fn seq_map<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Rayon-backed map over an index range; order-preserving.
#[cfg(feature = "parallel")]
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    seq_map(n, f)
}
