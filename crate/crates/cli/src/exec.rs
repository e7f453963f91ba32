use anyhow::{Context, Result};
use billiard_mc_core::exec::Executor;
use rayon::prelude::*;

/// Thread-pool executor. Results come back in index order, so output does
/// not depend on the thread count.
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    /// `threads == 0` uses one thread per logical core.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().context("starting worker pool")?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Pool {
    fn map_indexed<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
