//! Order-fixed reductions.
//!
//! Sums are evaluated over a binary tree whose shape depends only on the
//! input length. Subtrees may run on different rayon workers, but each node
//! always adds the same two partial sums, so the result is bit-identical for
//! any pool size.

use std::ops::Range;

const LEAF: usize = 512;

/// Tree sum of a slice.
pub fn tree_sum(xs: &[f64]) -> f64 {
    tree_sum_by(0..xs.len(), &|i| xs[i])
}

/// Tree sum of `f(i)` over `range`.
pub fn tree_sum_by<F>(range: Range<usize>, f: &F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let len = range.end - range.start;
    if len <= LEAF {
        return leaf_sum(range, f);
    }
    let mid = range.start + len / 2;
    let (a, b) = rayon::join(
        || tree_sum_by(range.start..mid, f),
        || tree_sum_by(mid..range.end, f),
    );
    a + b
}

fn leaf_sum<F: Fn(usize) -> f64>(range: Range<usize>, f: &F) -> f64 {
    // pairwise inside the leaf as well; keeps the error O(log n)
    let len = range.end - range.start;
    if len <= 8 {
        return range.map(f).sum();
    }
    let mid = range.start + len / 2;
    leaf_sum(range.start..mid, f) + leaf_sum(mid..range.end, f)
}

/// Maximum of `f(i)` over `range`; `0.0` for an empty range.
///
/// `max` is exactly associative, so no tree discipline is needed.
pub fn max_by<F>(range: Range<usize>, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    use rayon::prelude::*;
    range
        .into_par_iter()
        .with_min_len(4096)
        .map(f)
        .reduce(|| 0.0, f64::max)
}
