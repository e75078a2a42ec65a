use alloc::vec::Vec;

/// Runs independent indexed tasks and returns their results in index order.
///
/// Implementations may run tasks concurrently. Callers give each task its own
/// [`crate::RngStream`] derived from the task index, so the output never
/// depends on the implementation.
pub trait Executor: Sync {
    fn run<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs tasks one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn run<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..tasks).map(f).collect()
    }
}

/// Number of fixed-size chunks covering `n` items.
pub(crate) fn chunk_count(n: usize, chunk: usize) -> usize {
    n.div_ceil(chunk)
}

pub(crate) fn chunk_range(i: usize, n: usize, chunk: usize) -> core::ops::Range<usize> {
    let lo = i * chunk;
    lo..(lo + chunk).min(n)
}
