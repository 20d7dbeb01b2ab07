use rayon::prelude::*;
use tdeuler::exec::ModeMap;

/// Work-stealing map on the current rayon pool; results keep index order.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonMap;

impl ModeMap for RayonMap {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..count).into_par_iter().map(f).collect()
    }
}
