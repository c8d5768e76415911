//! Canonical reductions: schedule-independent sums and an optional parallel
//! map that preserves them.
//!
//! Floating-point addition is not associative, so the engine never reduces in
//! an order that depends on thread scheduling. The pattern throughout the
//! crate is: produce a `Vec` of per-item values (possibly in parallel — each
//! slot written by exactly one task), then fold that `Vec` sequentially.

use alloc::vec::Vec;

/// Sequential left fold over a slice: the one true summation order.
#[inline]
pub(crate) fn sum(values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &v in values {
        acc += v;
    }
    acc
}

/// Map `f` over `0..n` into a fresh `Vec`, in parallel when the `parallel`
/// feature is enabled and the work is large enough to amortize forking.
///
/// Output is identical for any thread count: slot `i` always holds `f(i)`.
#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<F>(n: usize, min_parallel: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    use rayon::prelude::*;
    if n >= min_parallel && rayon::current_num_threads() > 1 {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Sequential fallback used when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<F>(n: usize, _min_parallel: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync,
{
    (0..n).map(f).collect()
}
