//! Worker-pool plumbing shared by calibration and the operating-characteristic
//! simulator. Results never depend on the worker count: work is indexed and
//! collected in order, and every replicate owns a derived stream.

/// Run `f` inside a dedicated pool of `workers` threads; `workers == 0` uses
/// the global rayon pool.
pub fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool")
            .install(f)
    }
}
