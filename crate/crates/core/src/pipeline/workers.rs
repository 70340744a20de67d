use rayon::prelude::*;
use rayon::ThreadPool;

/// Number of worker threads when none is requested.
pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Order-preserving map over a slice, optionally on a dedicated pool.
pub(crate) struct Workers {
    pool: Option<ThreadPool>,
}

impl Workers {
    pub(crate) fn new(jobs: usize) -> Self {
        let pool = (jobs > 1).then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .expect("failed to start worker threads")
        });
        Workers { pool }
    }

    pub(crate) fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match &self.pool {
            None => items.iter().map(f).collect(),
            Some(pool) => pool.install(|| items.par_iter().map(f).collect()),
        }
    }

    /// Items handed to the pool at once by streaming callers.
    pub(crate) fn chunk_len(&self) -> usize {
        match &self.pool {
            None => 64,
            Some(pool) => 256 * pool.current_num_threads(),
        }
    }
}
