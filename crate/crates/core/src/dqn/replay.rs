use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};

/// One `(s, a, r, s', ifend)` experience sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub ifend: bool,
}

/// Bounded FIFO experience pool with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    storage: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            storage: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    /// Evicts the oldest transition once full.
    pub fn push(&mut self, t: Transition) {
        if self.storage.len() == self.capacity {
            self.storage.pop_front();
        }
        self.storage.push_back(t);
    }

    /// The most recently pushed transition.
    pub fn latest_mut(&mut self) -> Option<&mut Transition> {
        self.storage.back_mut()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.storage.iter()
    }

    /// `n` uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.storage.len() < n || n == 0 {
            return Err(Error::NotReady {
                len: self.storage.len(),
                needed: n,
            });
        }
        let len = self.storage.len();
        Ok((0..n).map(|_| &self.storage[rng.gen_range(0..len)]).collect())
    }
}
