//! Data-parallel primitives with a sequential fallback.
//!
//! Built with the `parallel` feature (default), the helpers dispatch to
//! rayon; without it they run sequentially with identical results. All
//! reductions combine per-chunk partials in a fixed order so outputs are
//! bit-identical regardless of worker count.

/// Maps `f` over `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn par_map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Fallible variant of [`par_map_indexed`]; returns the first error.
#[cfg(feature = "parallel")]
pub fn try_par_map_indexed<R, E, F>(n: usize, f: F) -> Result<Vec<R>, E>
where
    R: Send,
    E: Send,
    F: Fn(usize) -> Result<R, E> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn try_par_map_indexed<R, E, F>(n: usize, f: F) -> Result<Vec<R>, E>
where
    R: Send,
    E: Send,
    F: Fn(usize) -> Result<R, E> + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Maps `f` over chunk indices `0..n_chunks` and folds the partial results
/// sequentially in chunk order, so the combine order is deterministic.
pub fn par_chunk_fold<P, A, F, G>(n_chunks: usize, map: F, init: A, fold: G) -> A
where
    P: Send,
    F: Fn(usize) -> P + Sync + Send,
    G: FnMut(A, P) -> A,
{
    par_map_indexed(n_chunks, map).into_iter().fold(init, fold)
}
