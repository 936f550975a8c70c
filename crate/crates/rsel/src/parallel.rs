//! Data-parallel map over work batches, with a sequential fallback when the
//! `parallel` feature is disabled.
//!
//! Work is always split into fixed, index-identified batches and results are
//! collected in batch order, so the output does not depend on the thread
//! count or on whether rayon is compiled in at all.

/// Map `f` over batch indices `0..n_batches`, collecting in index order.
#[cfg(feature = "parallel")]
pub fn map_batches<R, F>(n_batches: u64, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64) -> R + Sync + Send,
{
    use rayon::prelude::*;
    (0..n_batches).into_par_iter().map(f).collect()
}

/// Map `f` over batch indices `0..n_batches`, collecting in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_batches<R, F>(n_batches: u64, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64) -> R + Sync + Send,
{
    map_batches_sequential(n_batches, f)
}

/// Always-sequential variant, kept available for benchmarking against the
/// parallel path and as the fallback implementation.
pub fn map_batches_sequential<R, F>(n_batches: u64, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64) -> R + Sync + Send,
{
    (0..n_batches).map(f).collect()
}
