//! Order-preserving parallel maps, sequential when the `parallel` feature is off.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Concatenates `f(0) ++ f(1) ++ ... ++ f(n-1)`.
pub(crate) fn flat_map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> Vec<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    let chunks: Vec<Vec<T>> = (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    let chunks: Vec<Vec<T>> = (0..n).map(f).collect();
    chunks.into_iter().flatten().collect()
}
