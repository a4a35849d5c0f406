//! Execution-mode switch for the data-parallel sweeps.
//!
//! With the `parallel` feature the sweeps run on the rayon pool; without it,
//! or when [`Exec::Sequential`] is requested, they run on the calling thread.
//! Results are always combined in index order so both paths return identical
//! values.

use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Splits `range` into contiguous chunks of at most `chunk` indices and maps
/// `f` over each chunk, returning the per-chunk results in range order.
pub fn map_chunks<R, F>(exec: Exec, range: Range<u64>, chunk: u64, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(Range<u64>) -> R + Sync + Send,
{
    let chunk = chunk.max(1);
    let starts: Vec<u64> = (range.start..range.end).step_by(chunk as usize).collect();
    let end = range.end;
    map(exec, &starts, |&s| f(s..(s + chunk).min(end)))
}
