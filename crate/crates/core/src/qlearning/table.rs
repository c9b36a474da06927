use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::search_space::StateVector;

/// Sparse Q-values keyed by (state, action); absent entries read as zero.
/// Terminal states never appear as the state of a key.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QTable<T> {
    entries: BTreeMap<(StateVector, StateVector), T>,
}

impl<T: Scalar> QTable<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn get(&self, state: &StateVector, action: &StateVector) -> T {
        self.entries
            .get(&(*state, *action))
            .copied()
            .unwrap_or_else(T::zero)
    }

    /// Stores a value. Writes keyed on a terminal state are refused.
    pub fn set(&mut self, state: StateVector, action: StateVector, value: T) -> bool {
        if state.is_terminal() {
            return false;
        }
        self.entries.insert((state, action), value);
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StateVector, &StateVector, T)> {
        self.entries.iter().map(|((s, a), v)| (s, a, *v))
    }

    /// Largest value over `actions`, absent entries counting as zero.
    pub fn max_over(&self, state: &StateVector, actions: &[StateVector]) -> Option<T> {
        actions
            .iter()
            .map(|a| self.get(state, a))
            .reduce(T::max)
    }

    pub fn checkpoint(&self, meta: CheckpointMeta<T>) -> QCheckpoint<T> {
        QCheckpoint {
            meta,
            q: self
                .entries
                .iter()
                .map(|((s, a), v)| (format!("{s}|{a}"), *v))
                .collect(),
        }
    }

    pub fn from_checkpoint(cp: &QCheckpoint<T>) -> Result<Self, CheckpointError> {
        let mut t = Self::new();
        for (key, &v) in &cp.q {
            let (s, a) = key
                .split_once('|')
                .ok_or_else(|| CheckpointError(format!("bad key {key:?}")))?;
            let s: StateVector = s.parse().map_err(|e| CheckpointError(format!("{e}")))?;
            let a: StateVector = a.parse().map_err(|e| CheckpointError(format!("{e}")))?;
            if !v.is_finite() {
                return Err(CheckpointError(format!("non-finite value at {key:?}")));
            }
            if !t.set(s, a, v) {
                return Err(CheckpointError(format!("terminal state key {key:?}")));
            }
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CheckpointMeta<T> {
    /// Number of completed episodes; the next episode to run.
    pub episode: u64,
    pub rng_state_seed: u64,
    pub alpha: T,
    pub gamma: T,
}

/// On-disk Q-table: `{"meta":{...},"q":{"<state>|<action>": value}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct QCheckpoint<T> {
    pub meta: CheckpointMeta<T>,
    pub q: BTreeMap<String, T>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid checkpoint: {0}")]
pub struct CheckpointError(pub String);
