use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

pub const NUM_STIMULI: u8 = 3;
/// Input symbol for "nothing on screen".
pub const NO_STIMULUS: u8 = 3;
pub const MAX_EPISODE_LEN: usize = 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Accept,
    Reject,
}

impl Action {
    /// `+1` for accept, `-1` for reject.
    pub fn sign(self) -> f64 {
        match self {
            Action::Accept => 1.0,
            Action::Reject => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub id: u64,
    pub stimuli: Vec<u8>,
    pub target_pair: [u8; 2],
    pub distractor: u8,
    pub initial_target: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TaskState {
    pub target_pair: [u8; 2],
    pub current_target: u8,
    pub step: usize,
}

impl TaskState {
    pub fn initial(episode: &Episode) -> Self {
        Self {
            target_pair: episode.target_pair,
            current_target: episode.initial_target,
            step: 0,
        }
    }

    pub fn other_target(&self) -> u8 {
        if self.current_target == self.target_pair[0] {
            self.target_pair[1]
        } else {
            self.target_pair[0]
        }
    }
}

/// One step of the goal-switching rule: accept iff the stimulus is the
/// current target, and a correct accept hands the role to the other member
/// of the target pair.
///
/// Panics if `stimulus` is not one of the three stimulus ids.
pub fn step_oracle(state: &TaskState, stimulus: u8) -> (Action, TaskState) {
    assert!(
        stimulus < NUM_STIMULI,
        "stimulus id {stimulus} out of range"
    );
    let mut next = *state;
    next.step += 1;
    if stimulus == state.current_target {
        next.current_target = state.other_target();
        (Action::Accept, next)
    } else {
        (Action::Reject, next)
    }
}

/// Latent state and oracle action at one step. `target` is the target in
/// force when the stimulus appears.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepRecord {
    pub stimulus: u8,
    pub target: u8,
    pub action: Action,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.stimuli.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stimuli.is_empty()
    }

    pub fn alternate_target(&self) -> u8 {
        if self.initial_target == self.target_pair[0] {
            self.target_pair[1]
        } else {
            self.target_pair[0]
        }
    }

    pub fn trace(&self) -> Vec<StepRecord> {
        let mut state = TaskState::initial(self);
        self.stimuli
            .iter()
            .map(|&stimulus| {
                let target = state.current_target;
                let (action, next) = step_oracle(&state, stimulus);
                state = next;
                StepRecord {
                    stimulus,
                    target,
                    action,
                }
            })
            .collect()
    }

    /// `+-1` labels per step.
    pub fn targets(&self) -> Vec<f64> {
        self.trace().iter().map(|r| r.action.sign()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.target_pair;
        let ok = a != b
            && a < NUM_STIMULI
            && b < NUM_STIMULI
            && self.distractor < NUM_STIMULI
            && self.distractor != a
            && self.distractor != b
            && self.target_pair.contains(&self.initial_target)
            && !self.stimuli.is_empty()
            && self.stimuli.iter().all(|&s| s < NUM_STIMULI);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("malformed episode {}", self.id)))
        }
    }
}

pub fn generate_episode(rng: &mut Rng, id: u64, length: usize) -> Result<Episode> {
    if !(1..=MAX_EPISODE_LEN).contains(&length) {
        return Err(Error::config(
            "episode_length",
            format!("must lie in 1..={MAX_EPISODE_LEN}, got {length}"),
        ));
    }
    let distractor = rng.below(NUM_STIMULI as usize) as u8;
    let mut pair = [0u8; 2];
    let mut k = 0;
    for s in 0..NUM_STIMULI {
        if s != distractor {
            pair[k] = s;
            k += 1;
        }
    }
    let initial_target = pair[rng.below(2)];
    let stimuli = (0..length)
        .map(|_| rng.below(NUM_STIMULI as usize) as u8)
        .collect();
    Ok(Episode {
        id,
        stimuli,
        target_pair: pair,
        distractor,
        initial_target,
    })
}

/// Episodes with consecutive ids starting at `first_id`, each drawn from its
/// own fork of `rng`.
pub fn generate_episodes(
    rng: &mut Rng,
    first_id: u64,
    count: usize,
    lengths: (usize, usize),
) -> Result<Vec<Episode>> {
    let (lo, hi) = lengths;
    if lo > hi {
        return Err(Error::config(
            "episode_length",
            format!("empty range {lo}..={hi}"),
        ));
    }
    (0..count)
        .map(|i| {
            let mut r = rng.fork();
            let len = lo + r.below(hi - lo + 1);
            generate_episode(&mut r, first_id + i as u64, len)
        })
        .collect()
}
