//! Row-chunked work splitting. With the `parallel` feature the chunks are
//! handed to rayon; without it they run in order on the calling thread.
//! Chunks never share outputs, so both paths produce identical bits.

/// Calls `f(first_row, rows)` for consecutive chunks of `row_len`-wide rows.
pub(crate) fn for_each_row_chunk<F>(out: &mut [f64], row_len: usize, rows_per_chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if row_len == 0 || out.is_empty() {
        return;
    }
    let chunk = row_len * rows_per_chunk.max(1);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, rows)| f(i * rows_per_chunk.max(1), rows));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, rows) in out.chunks_mut(chunk).enumerate() {
            f(i * rows_per_chunk.max(1), rows);
        }
    }
}

/// Sequential variant, always available (used by benches and as the
/// reference path).
pub(crate) fn for_each_row_chunk_seq<F>(out: &mut [f64], row_len: usize, rows_per_chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]),
{
    if row_len == 0 || out.is_empty() {
        return;
    }
    let chunk = row_len * rows_per_chunk.max(1);
    for (i, rows) in out.chunks_mut(chunk).enumerate() {
        f(i * rows_per_chunk.max(1), rows);
    }
}

/// Maps `f` over `items`, in parallel when the feature is enabled. Output
/// order always follows input order.
pub(crate) fn map_collect<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}
