//! Shared ring-buffer experience replay.

use rand::seq::index;
use rand::RngCore;

use crate::error::{contract, Error, Result};
use crate::observation::Observation;
use crate::world::Command;

pub const DEFAULT_CAPACITY: usize = 20_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: Command,
    pub reward: f64,
    pub next_obs: Observation,
    /// Arrived or collided; a timeout still bootstraps.
    pub done: bool,
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    slots: Vec<Transition>,
    capacity: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return contract("replay capacity must be positive");
        }
        Ok(Self {
            slots: Vec::with_capacity(capacity.min(4096)),
            capacity,
            inserted: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Total number of transitions ever pushed.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if !t.reward.is_finite() || !t.action.within_bounds() {
            return contract("transition with non-finite reward or out-of-bounds action");
        }
        if self.slots.len() < self.capacity {
            self.slots.push(t);
        } else {
            let slot = (self.inserted % self.capacity as u64) as usize;
            self.slots[slot] = t;
        }
        self.inserted += 1;
        Ok(())
    }

    /// The `k`-th oldest transition still held.
    pub fn get(&self, k: usize) -> Option<&Transition> {
        if k >= self.slots.len() {
            return None;
        }
        let start = if self.slots.len() < self.capacity {
            0
        } else {
            (self.inserted % self.capacity as u64) as usize
        };
        self.slots.get((start + k) % self.slots.len())
    }

    /// Uniform sample of `batch` distinct slots.
    pub fn sample_indices(&self, batch: usize, rng: &mut dyn RngCore) -> Result<Vec<usize>> {
        if batch == 0 || batch > self.slots.len() {
            return Err(Error::BufferUnderfilled {
                have: self.slots.len(),
                need: batch.max(1),
            });
        }
        Ok(index::sample(rng, self.slots.len(), batch).into_vec())
    }

    pub fn sample(&self, batch: usize, rng: &mut dyn RngCore) -> Result<Vec<&Transition>> {
        Ok(self
            .sample_indices(batch, rng)?
            .into_iter()
            .map(|i| &self.slots[i])
            .collect())
    }
}
