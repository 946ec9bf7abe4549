use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Cell, DoorState, GridState, KeyState};

/// The parts of a [`GridState`] a tabular learner sees. The step counter is
/// left out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StateKey {
    pub split: u8,
    pub door_row: u8,
    pub agent: Cell,
    pub key: KeyState,
    pub door: DoorState,
}

impl From<&GridState> for StateKey {
    fn from(s: &GridState) -> Self {
        Self {
            split: s.geometry.split,
            door_row: s.geometry.door_row,
            agent: s.agent,
            key: s.key,
            door: s.door,
        }
    }
}

/// Assigns dense indices to states on first sight.
#[derive(Clone, Debug, Default)]
pub struct StateIndexer {
    map: HashMap<StateKey, usize>,
    keys: Vec<StateKey>,
}

impl StateIndexer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn index(&mut self, s: &GridState) -> usize {
        let key = StateKey::from(s);
        if let Some(&i) = self.map.get(&key) {
            return i;
        }
        self.keys.push(key);
        self.map.insert(key, self.keys.len() - 1);
        self.keys.len() - 1
    }

    pub fn get(&self, s: &GridState) -> Option<usize> {
        self.map.get(&StateKey::from(s)).copied()
    }

    pub fn key(&self, i: usize) -> &StateKey {
        &self.keys[i]
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}
