//! Thin switch between rayon and sequential iteration.
//!
//! Every parallel loop in the crate maps over an index range and collects
//! into a `Vec` in index order, so reductions performed afterwards see the
//! same summation order regardless of how many threads ran the map.

/// Maps `f` over `0..n` and returns the results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    (0..n).map(f).collect()
}

/// Maps `f` over fixed-size chunks of `data` (the last chunk may be short).
pub fn map_chunks<'a, S, T, F>(data: &'a [S], chunk: usize, f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(usize, &'a [S]) -> T + Send + Sync,
{
    assert!(chunk > 0);
    let n = data.len().div_ceil(chunk);
    map_indexed(n, |i| {
        let start = i * chunk;
        let end = (start + chunk).min(data.len());
        f(i, &data[start..end])
    })
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
