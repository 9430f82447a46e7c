//! Per-run random streams.
//!
//! Every Monte Carlo run draws from its own ChaCha8 stream keyed by
//! `(master_seed, run_index)`: the seed selects the key and the run index
//! selects the stream, so a run's numbers do not depend on which worker
//! executes it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

pub fn run_stream(master_seed: u64, run_index: u64) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run_index);
    rng
}

/// Master seed of point `index` of a parameter sweep.
pub fn sweep_seed(base_seed: u64, index: usize) -> u64 {
    base_seed ^ index as u64
}
