//! A fully observed DoorKey gridworld.
//!
//! The grid is surrounded by walls and split by a vertical wall with a single
//! locked door. The agent starts in the left room next to a key and has to
//! pick it up, unlock the door and walk to the goal in the bottom-right
//! corner. Cells are `(row, col)` with the origin in the top-left corner.

mod demo;
mod index;
mod io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::srm::{EnvTransition, EventEnv, EventSet};

pub use demo::{demonstrate, plan};
pub use index::{StateIndexer, StateKey};
pub use io::{read_jsonl, write_jsonl, StepRecord};

pub const PICK_UP_KEY: &str = "Pick_up_Key";
pub const DROP_KEY: &str = "Drop_Key";
pub const OPEN_DOOR: &str = "Open_Door";
pub const CLOSE_DOOR: &str = "Close_Door";
pub const UNLOCK_DOOR: &str = "Unlock_Door";
pub const REACH_GOAL: &str = "Reach_Goal";

/// Every event atom the gridworld can emit.
pub const VOCABULARY: [&str; 6] = [
    PICK_UP_KEY,
    DROP_KEY,
    OPEN_DOOR,
    CLOSE_DOOR,
    UNLOCK_DOOR,
    REACH_GOAL,
];

pub type Cell = (u8, u8);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridAction {
    Up,
    Down,
    Left,
    Right,
    Pickup,
    Drop,
    Toggle,
}

impl GridAction {
    pub const ALL: [GridAction; 7] = [
        GridAction::Up,
        GridAction::Down,
        GridAction::Left,
        GridAction::Right,
        GridAction::Pickup,
        GridAction::Drop,
        GridAction::Toggle,
    ];
    pub const COUNT: usize = 7;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    fn delta(self) -> Option<(i8, i8)> {
        match self {
            GridAction::Up => Some((-1, 0)),
            GridAction::Down => Some((1, 0)),
            GridAction::Left => Some((0, -1)),
            GridAction::Right => Some((0, 1)),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoorState {
    Locked,
    Closed,
    Open,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyState {
    At(Cell),
    Held,
}

/// Position of the dividing wall and its door.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geometry {
    pub size: u8,
    /// Column of the dividing wall.
    pub split: u8,
    pub door_row: u8,
}

impl Geometry {
    pub fn door(&self) -> Cell {
        (self.door_row, self.split)
    }

    pub fn goal(&self) -> Cell {
        (self.size - 2, self.size - 2)
    }

    pub fn max_steps(&self) -> u32 {
        10 * u32::from(self.size) * u32::from(self.size)
    }

    fn is_wall(&self, (r, c): Cell, extra: &[Cell]) -> bool {
        let edge = self.size - 1;
        r == 0
            || c == 0
            || r == edge
            || c == edge
            || (c == self.split && r != self.door_row)
            || extra.contains(&(r, c))
    }

    fn left_room(&self) -> impl Iterator<Item = Cell> + '_ {
        (1..self.size - 1).flat_map(move |r| (1..self.split).map(move |c| (r, c)))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridState {
    pub geometry: Geometry,
    pub agent: Cell,
    pub key: KeyState,
    pub door: DoorState,
    /// Steps taken so far.
    pub t: u32,
    pub done: bool,
}

impl GridState {
    pub fn holding(&self) -> bool {
        self.key == KeyState::Held
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuccessReward {
    /// `1 - 0.9 * t / T_max`.
    #[default]
    Decaying,
    /// 1 on success.
    Binary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub size: u8,
    /// Fix the dividing wall column instead of drawing it per episode.
    pub split: Option<u8>,
    /// Fix the door row instead of drawing it per episode.
    pub door_row: Option<u8>,
    pub success_reward: SuccessReward,
    /// Additional wall cells, mostly for tests.
    pub extra_walls: Vec<Cell>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            size: 6,
            split: None,
            door_row: None,
            success_reward: SuccessReward::Decaying,
            extra_walls: Vec::new(),
        }
    }
}

impl GridConfig {
    pub fn with_size(size: u8) -> Self {
        Self {
            size,
            ..Self::default()
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("bad geometry: {0}")]
    BadGeometry(String),
    #[error("step after the episode ended")]
    StepAfterDone,
    #[error("no plan reaches the goal from this layout")]
    PlanFailure,
    #[error("action index {0} out of range")]
    BadAction(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvOutcome {
    pub next: GridState,
    pub reward: f64,
    pub done: bool,
    pub events: EventSet,
}

/// Events of one transition, a pure function of `(s, a, s')`.
pub fn extract_events(s: &GridState, _a: GridAction, s2: &GridState) -> EventSet {
    let mut ev = EventSet::new();
    if !s.holding() && s2.holding() {
        ev.insert(PICK_UP_KEY);
    }
    if s.holding() && !s2.holding() {
        ev.insert(DROP_KEY);
    }
    if s.door == DoorState::Locked && s2.door == DoorState::Open {
        ev.insert(UNLOCK_DOOR);
    }
    if s.door != DoorState::Open && s2.door == DoorState::Open {
        ev.insert(OPEN_DOOR);
    }
    if s.door == DoorState::Open && s2.door == DoorState::Closed {
        ev.insert(CLOSE_DOOR);
    }
    if s.agent != s2.agent && s2.agent == s2.geometry.goal() {
        ev.insert(REACH_GOAL);
    }
    ev
}

fn adjacent(a: Cell, b: Cell) -> bool {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1) == 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct DoorKey {
    config: GridConfig,
}

impl DoorKey {
    pub fn new(config: GridConfig) -> Result<Self, GridError> {
        let n = config.size;
        if n < 5 {
            return Err(GridError::BadGeometry(format!("grid size {n} is below 5")));
        }
        if let Some(s) = config.split {
            if !(2..=n - 3).contains(&s) {
                return Err(GridError::BadGeometry(format!(
                    "split column {s} outside 2..={}",
                    n - 3
                )));
            }
        }
        if let Some(d) = config.door_row {
            if !(1..=n - 2).contains(&d) {
                return Err(GridError::BadGeometry(format!(
                    "door row {d} outside 1..={}",
                    n - 2
                )));
            }
        }
        Ok(Self { config })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    /// Draws a layout. Equal seeds give equal states.
    pub fn reset(&self, seed: u64) -> GridState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.config.size;
        let split = self
            .config
            .split
            .unwrap_or_else(|| rng.random_range(2..=n - 3));
        let door_row = self
            .config
            .door_row
            .unwrap_or_else(|| rng.random_range(1..=n - 2));
        let geometry = Geometry {
            size: n,
            split,
            door_row,
        };
        let cells: Vec<Cell> = geometry
            .left_room()
            .filter(|c| !self.config.extra_walls.contains(c))
            .collect();
        let agent = cells[rng.random_range(0..cells.len())];
        let key = loop {
            let k = cells[rng.random_range(0..cells.len())];
            if k != agent || cells.len() == 1 {
                break k;
            }
        };
        GridState {
            geometry,
            agent,
            key: KeyState::At(key),
            door: DoorState::Locked,
            t: 0,
            done: false,
        }
    }

    fn blocked(&self, s: &GridState, cell: Cell) -> bool {
        if s.geometry.is_wall(cell, &self.config.extra_walls) {
            return true;
        }
        cell == s.geometry.door() && s.door != DoorState::Open
    }

    pub fn step(&self, s: &GridState, action: GridAction) -> Result<EnvOutcome, GridError> {
        if s.done {
            return Err(GridError::StepAfterDone);
        }
        let g = s.geometry;
        let mut next = s.clone();
        match action {
            GridAction::Pickup => {
                if let KeyState::At(k) = s.key {
                    if k == s.agent || adjacent(k, s.agent) {
                        next.key = KeyState::Held;
                    }
                }
            }
            GridAction::Drop => {
                if s.holding() && s.agent != g.door() {
                    next.key = KeyState::At(s.agent);
                }
            }
            GridAction::Toggle => {
                if adjacent(s.agent, g.door()) {
                    next.door = match s.door {
                        DoorState::Locked if s.holding() => DoorState::Open,
                        DoorState::Locked => DoorState::Locked,
                        DoorState::Closed => DoorState::Open,
                        DoorState::Open => DoorState::Closed,
                    };
                }
            }
            mv => {
                let (dr, dc) = mv.delta().expect("movement action");
                let target = (
                    s.agent.0.wrapping_add_signed(dr),
                    s.agent.1.wrapping_add_signed(dc),
                );
                if !self.blocked(s, target) {
                    next.agent = target;
                }
            }
        }
        next.t = s.t + 1;
        let events = extract_events(s, action, &next);
        let reached = events.contains(REACH_GOAL);
        let reward = if reached {
            match self.config.success_reward {
                SuccessReward::Decaying => 1.0 - 0.9 * f64::from(s.t) / f64::from(g.max_steps()),
                SuccessReward::Binary => 1.0,
            }
        } else {
            0.0
        };
        next.done = reached || next.t >= g.max_steps();
        Ok(EnvOutcome {
            done: next.done,
            next,
            reward,
            events,
        })
    }
}

impl EventEnv for DoorKey {
    type State = GridState;
    type Error = GridError;

    fn vocabulary(&self) -> Vec<String> {
        VOCABULARY.iter().map(|s| s.to_string()).collect()
    }

    fn initial_state(&self, seed: u64) -> Result<GridState, GridError> {
        Ok(self.reset(seed))
    }

    fn transition(
        &self,
        state: &GridState,
        action: usize,
    ) -> Result<EnvTransition<GridState>, GridError> {
        let a = GridAction::from_index(action).ok_or(GridError::BadAction(action))?;
        let out = self.step(state, a)?;
        Ok(EnvTransition {
            next: out.next,
            reward: out.reward,
            done: out.done,
            events: out.events,
        })
    }
}

/// Renders a state as ASCII: `#` wall, `A` agent, `K` key, `L`/`D`/`_`
/// locked, closed and open door, `G` goal.
pub fn render(env: &DoorKey, s: &GridState) -> String {
    let g = s.geometry;
    let mut out = String::new();
    for r in 0..g.size {
        for c in 0..g.size {
            let cell = (r, c);
            let ch = if cell == s.agent {
                'A'
            } else if s.key == KeyState::At(cell) {
                'K'
            } else if cell == g.door() {
                match s.door {
                    DoorState::Locked => 'L',
                    DoorState::Closed => 'D',
                    DoorState::Open => '_',
                }
            } else if g.is_wall(cell, &env.config.extra_walls) {
                '#'
            } else if cell == g.goal() {
                'G'
            } else {
                '.'
            };
            out.push(ch);
        }
        out.push('\n');
    }
    out
}
