//! Feature-gated data parallelism. With the `parallel` feature the indexed
//! map runs on rayon; otherwise it runs sequentially. Results come back in
//! index order either way, so downstream aggregation is deterministic.

#[cfg(feature = "parallel")]
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Cap the rayon global pool at `n` threads. Must be called before any
/// parallel work runs; later calls fail silently (rayon allows one global
/// build). A no-op when the `parallel` feature is off.
#[cfg(feature = "parallel")]
pub fn configure_threads(n: usize) {
    if n > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_n: usize) {}
