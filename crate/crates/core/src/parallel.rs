//! Chunked map helper with a fixed reduction order.
//!
//! Work over `n` items is split into fixed-size chunks; each chunk produces
//! one partial result and partials are merged in chunk order. The chunk
//! boundaries do not depend on thread count, so the parallel and sequential
//! paths are bit-identical.

pub const CHUNK: usize = 256;

#[cfg(feature = "parallel")]
pub fn map_chunks<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(std::ops::Range<usize>) -> R + Sync,
    R: Send,
{
    use rayon::prelude::*;
    let n_chunks = n.div_ceil(CHUNK);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_chunks<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(std::ops::Range<usize>) -> R + Sync,
    R: Send,
{
    map_chunks_sequential(n, f)
}

/// Sequential path, always available (used by the benchmark suite).
pub fn map_chunks_sequential<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(std::ops::Range<usize>) -> R,
{
    let n_chunks = n.div_ceil(CHUNK);
    (0..n_chunks)
        .map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect()
}
