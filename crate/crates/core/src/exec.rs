//! Work distribution for ensembles.

use alloc::vec::Vec;

/// Runs independent indexed jobs and returns results in index order.
///
/// Implementations may evaluate jobs concurrently, but the returned vector
/// must be ordered by index so callers get identical output regardless of
/// the worker count.
pub trait Executor: Sync {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Single-threaded executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
