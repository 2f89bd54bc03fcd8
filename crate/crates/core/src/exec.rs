//! Execution strategy for independent replicates.

use alloc::vec::Vec;

/// Evaluates `f(0), …, f(n-1)` and returns the results in index order.
///
/// Implementations may run the calls concurrently and in any order; callers
/// only rely on the output being ordered by index.
pub trait Executor: Sync {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every call on the current thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
