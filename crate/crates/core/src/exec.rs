//! Execution strategy for independent per-mode work.
//!
//! Every implementation must return results in index order so that reductions
//! downstream are bit-identical regardless of how the work was scheduled.

use alloc::vec::Vec;

pub trait ModeMap {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs every item on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl ModeMap for Sequential {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}
