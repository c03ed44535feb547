//! Data-parallel kernels with bit-for-bit deterministic reductions.
//!
//! Work is split into fixed-size chunks whose boundaries do not depend on
//! the worker count; each chunk is accumulated sequentially in ascending
//! order and the chunk partials are combined by a fixed pairwise tree.
//! `--threads 1` and `--threads 8` therefore produce identical bits. With
//! the `parallel` feature disabled everything runs on the calling thread
//! through the same reduction tree.

use crate::logsigned::LogSigned;

/// Chunk width for subset enumerations.
pub const CHUNK: u64 = 1 << 12;

/// Run `f` inside a rayon pool of `threads` workers (when given and the
/// `parallel` feature is on); otherwise run it directly.
#[cfg(feature = "parallel")]
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) if n > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .expect("thread pool")
            .install(f),
        _ => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_threads<R: Send>(_threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    f()
}

/// Map each index in `0..count` through `term` and sum in the log domain.
///
/// The sum is organized as fixed chunks of `CHUNK` consecutive indices,
/// accumulated left to right within a chunk, then a pairwise tree over the
/// chunk partials in chunk order.
pub fn sum_terms<F>(count: u64, term: F) -> LogSigned
where
    F: Fn(u64) -> LogSigned + Sync + Send,
{
    let chunks = count.div_ceil(CHUNK).max(1);
    let partial = |c: u64| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(count);
        let mut acc = LogSigned::ZERO;
        for i in lo..hi {
            acc = acc.add(&term(i));
        }
        acc
    };
    let partials = map_indexed(chunks as usize, |c| partial(c as u64));
    tree_fold(&partials)
}

/// Pairwise tree over a slice, left to right; fixed shape for determinism.
pub fn tree_fold(parts: &[LogSigned]) -> LogSigned {
    match parts.len() {
        0 => LogSigned::ZERO,
        1 => parts[0],
        n => {
            let mid = n.div_ceil(2);
            tree_fold(&parts[..mid]).add(&tree_fold(&parts[mid..]))
        }
    }
}

/// Order-preserving parallel map over `0..n`.
#[cfg(feature = "parallel")]
pub fn map_indexed<T: Send, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T: Send, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Order-preserving parallel map over a slice.
pub fn map_slice<T: Sync, U: Send, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U + Sync + Send,
{
    map_indexed(items.len(), |i| f(&items[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_threadcount_independent() {
        let term = |i: u64| LogSigned::from_f64((i as f64 * 0.37).sin());
        let a = with_threads(Some(1), || sum_terms(100_000, term));
        let b = with_threads(Some(8), || sum_terms(100_000, term));
        assert_eq!(a.log_mag.to_bits(), b.log_mag.to_bits());
        assert_eq!(a.phase.to_bits(), b.phase.to_bits());
    }

    #[test]
    fn tree_fold_matches_sequential_value() {
        let parts: Vec<LogSigned> = (1..=100).map(|i| LogSigned::from_f64(i as f64)).collect();
        let tree = tree_fold(&parts);
        assert!((tree.to_f64().unwrap() - 5050.0).abs() < 1e-9);
    }
}
