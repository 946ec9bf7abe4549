//! Shared fixtures for the benchmarks.

use srmkit::gridworld::{demonstrate, DoorKey, GridConfig, GridState};
use srmkit::srm::Trajectory;

pub const DOORKEY_SRC: &str = include_str!("../../core/assets/doorkey.srm");

/// Planner demonstrations on a random-geometry grid of the given size.
pub fn demos(size: u8, n: usize) -> Vec<Trajectory<GridState>> {
    let env = DoorKey::new(GridConfig::with_size(size)).expect("valid grid");
    demonstrate(&env, n, 7).expect("planner succeeds")
}
