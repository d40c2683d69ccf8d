//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) the `par_*` functions fan out
//! over rayon's pool; without it they alias the sequential versions. Outputs
//! are index-ordered either way, so results are identical across both builds
//! and any thread count. The `seq_*` versions are always available so
//! benchmarks can compare the two paths in one binary.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, collecting in index order.
pub fn seq_map<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Parallel (or fallback-sequential) indexed map; order-stable.
#[cfg(feature = "parallel")]
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Parallel (or fallback-sequential) indexed map; order-stable.
#[cfg(not(feature = "parallel"))]
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    seq_map(n, f)
}

/// Applies `f` to each element of a mutable slice with its index.
pub fn seq_for_each_mut<T, F>(items: &mut [T], f: F)
where
    F: Fn(usize, &mut T),
{
    for (i, item) in items.iter_mut().enumerate() {
        f(i, item);
    }
}

/// Parallel (or fallback-sequential) indexed for-each over a mutable slice.
#[cfg(feature = "parallel")]
pub fn par_for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    items.par_iter_mut().enumerate().for_each(|(i, item)| f(i, item));
}

/// Parallel (or fallback-sequential) indexed for-each over a mutable slice.
#[cfg(not(feature = "parallel"))]
pub fn par_for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    seq_for_each_mut(items, f)
}
