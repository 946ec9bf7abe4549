use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{DoorKey, GridAction, GridState};
use crate::srm::{EventSet, Trajectory};

/// One line of a trajectory log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub state: GridState,
    pub action: GridAction,
    pub events: EventSet,
    pub default_reward: f64,
}

/// Writes trajectories as line-delimited JSON, one object per step. The
/// default reward is recomputed from the dynamics.
pub fn write_jsonl<W: Write>(
    env: &DoorKey,
    trajectories: &[Trajectory<GridState>],
    mut w: W,
) -> std::io::Result<()> {
    for tau in trajectories {
        for (t, s) in tau.steps.iter().enumerate() {
            let action = GridAction::from_index(s.action).ok_or_else(|| {
                std::io::Error::other(format!("action index {} out of range", s.action))
            })?;
            let mut state = s.state.clone();
            state.done = false;
            let default_reward = env.step(&state, action).map(|o| o.reward).unwrap_or(0.0);
            let rec = StepRecord {
                t,
                state: s.state.clone(),
                action,
                events: s.events.clone(),
                default_reward,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Reads a log back; a record with `t == 0` starts a new trajectory.
pub fn read_jsonl<R: BufRead>(r: R) -> std::io::Result<Vec<Trajectory<GridState>>> {
    let mut out: Vec<Trajectory<GridState>> = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: StepRecord = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("line {}: {e}", n + 1),
            )
        })?;
        if rec.t == 0 || out.is_empty() {
            out.push(Trajectory::default());
        }
        out.last_mut()
            .expect("pushed above")
            .push(rec.state, rec.action.index(), rec.events);
    }
    Ok(out)
}
