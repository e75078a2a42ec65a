use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use smoothwave_core::Executor;

/// Executor backed by a dedicated rayon pool. A single worker runs tasks
/// inline on the calling thread.
pub struct Workers {
    pool: Option<ThreadPool>,
    count: usize,
}

impl Workers {
    /// `count = 0` uses every available core.
    pub fn new(count: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let count = if count == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            count
        };
        let pool = if count > 1 {
            Some(ThreadPoolBuilder::new().num_threads(count).build()?)
        } else {
            None
        };
        Ok(Self { pool, count })
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

impl Executor for Workers {
    fn run<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match &self.pool {
            None => (0..tasks).map(f).collect(),
            Some(pool) => pool.install(|| (0..tasks).into_par_iter().map(f).collect()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_task_order() {
        let w = Workers::new(4).unwrap();
        assert_eq!(w.count(), 4);
        let out = w.run(1000, |i| i * i);
        assert!(out.iter().enumerate().all(|(i, &v)| v == i * i));
    }
}
