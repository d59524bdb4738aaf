//! Shared fixtures for the criterion planner benches.

use omninav::mapping::{GridCell, GridWindow};
use omninav::planner::{random_window, solvable_pairs};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct PlannerFixture {
    pub window: GridWindow,
    pub pairs: Vec<(GridCell, GridCell)>,
}

/// Random map at density 0.25 with `pairs` connected endpoint pairs, the same
/// for every method under test.
pub fn planner_fixture(width: usize, height: usize, pairs: usize, seed: u64) -> PlannerFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = random_window(width, height, 0.25, &mut rng);
    let pairs = solvable_pairs(&window, pairs, &mut rng);
    PlannerFixture { window, pairs }
}
