//! Machines shipped with the crate.

use crate::dsl::parse_named;
use crate::srm::Srm;

pub const DOORKEY: &str = include_str!("../assets/doorkey.srm");
pub const KEYCORRIDOR: &str = include_str!("../assets/keycorridor.srm");
pub const OBSTRUCTEDMAZE: &str = include_str!("../assets/obstructedmaze.srm");

/// The DoorKey machine used by the gridworld experiments.
pub fn doorkey() -> Srm {
    parse_named("doorkey.srm", DOORKEY).expect("bundled asset parses")
}

pub fn keycorridor() -> Srm {
    parse_named("keycorridor.srm", KEYCORRIDOR).expect("bundled asset parses")
}

pub fn obstructedmaze() -> Srm {
    parse_named("obstructedmaze.srm", OBSTRUCTEDMAZE).expect("bundled asset parses")
}
