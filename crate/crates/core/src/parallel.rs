//! Worker-pool helpers. Every parallel operation in this crate runs on the
//! current rayon pool, so callers pick the worker count by choosing the pool.

/// Runs `f` on a dedicated pool of `workers` threads (at least one).
pub fn with_workers<R, F>(workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("failed to build worker pool");
    pool.install(f)
}

/// Logical core count, falling back to one.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
