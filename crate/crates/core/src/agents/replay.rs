use std::collections::VecDeque;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, ObservableState};

pub const DEFAULT_CAPACITY: usize = 100_000;
pub const BATCH_SIZE: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: [f64; ObservableState::LEN],
    pub action: usize,
    pub reward: f64,
    pub next_obs: [f64; ObservableState::LEN],
    pub done: bool,
}

/// A minibatch laid out for the networks: one row per transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Vec<usize>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub done: Vec<bool>,
}

impl Batch {
    pub fn from_transitions<'a>(items: impl IntoIterator<Item = &'a Transition>) -> Self {
        let items: Vec<&Transition> = items.into_iter().collect();
        let n = items.len();
        let d = ObservableState::LEN;
        Self {
            obs: Array2::from_shape_fn((n, d), |(i, j)| items[i].obs[j]),
            actions: items.iter().map(|t| t.action).collect(),
            rewards: items.iter().map(|t| t.reward).collect(),
            next_obs: Array2::from_shape_fn((n, d), |(i, j)| items[i].next_obs[j]),
            done: items.iter().map(|t| t.done).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Taken actions as one-hot rows.
    pub fn one_hot_actions(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.len(), Action::COUNT));
        for (i, &k) in self.actions.iter().enumerate() {
            a[[i, k]] = 1.0;
        }
        a
    }
}

/// Bounded FIFO of transitions; the oldest is evicted first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity.min(DEFAULT_CAPACITY)),
            capacity,
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn is_ready(&self, n: usize) -> bool {
        self.items.len() >= n
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `n` distinct transitions drawn uniformly, or `None` while fewer than
    /// `n` are stored.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<&Transition>> {
        if !self.is_ready(n) {
            return None;
        }
        let idx = rand::seq::index::sample(rng, self.items.len(), n);
        Some(idx.iter().map(|i| &self.items[i]).collect())
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Batch> {
        self.sample(n, rng).map(Batch::from_transitions)
    }
}
