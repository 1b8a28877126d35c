use std::sync::Arc;

use gridfold_core::rng::UnitRunner;
use rayon::prelude::*;

/// Work-unit runner on a rayon pool. Results come back in unit order, so
/// the thread count never changes an emitted number.
#[derive(Debug, Clone, Default)]
pub struct Rayon {
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl Rayon {
    /// `threads = 0` uses the global pool.
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        if threads == 0 {
            return Ok(Rayon { pool: None });
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        Ok(Rayon {
            pool: Some(Arc::new(pool)),
        })
    }
}

impl UnitRunner for Rayon {
    fn run_units<R, F>(&self, units: u64, work: F) -> Vec<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send,
    {
        let go = || (0..units).into_par_iter().map(&work).collect();
        match &self.pool {
            Some(p) => p.install(go),
            None => go(),
        }
    }
}
