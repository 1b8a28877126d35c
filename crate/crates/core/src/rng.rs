//! Seeding conventions.
//!
//! Every random quantity in the crate is drawn from ChaCha8, a counter-based
//! generator. A run is identified by a `u64` seed; independent work units
//! (Monte Carlo chunks, trial batches) use separate ChaCha streams of the same
//! key, so results never depend on how units are scheduled onto workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for the main stream of `seed`.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for work unit `unit` under `seed`. Stream 0 is the main stream,
/// so units start at stream 1.
pub fn substream(seed: u64, unit: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(unit.wrapping_add(1));
    rng
}

/// Runs independent work units and returns their results in unit order.
///
/// The sequential runner lives here; the `gridfold` crate provides a
/// thread-pool implementation. Because units carry their own seeds, any
/// runner yields the same vector.
pub trait UnitRunner {
    fn run_units<R, F>(&self, units: u64, work: F) -> alloc::vec::Vec<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl UnitRunner for Sequential {
    fn run_units<R, F>(&self, units: u64, work: F) -> alloc::vec::Vec<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send,
    {
        (0..units).map(work).collect()
    }
}
