//! Thread-pool executor for bootstrap replicates.

use dtaboot_core::exec::Executor;
use rayon::prelude::*;

/// Runs replicates on a dedicated rayon pool of a fixed size.
///
/// Results are identical for every thread count: each replicate draws from
/// its own random stream and results are collected in replicate order.
pub struct ThreadPool {
    pool: rayon::ThreadPool,
}

impl ThreadPool {
    /// `threads == 0` lets rayon pick the number of logical CPUs.
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(ThreadPool { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for ThreadPool {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
