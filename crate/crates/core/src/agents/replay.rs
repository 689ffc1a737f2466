use std::collections::VecDeque;

use rand::Rng;

use super::QFunction;
use crate::error::Result;
use crate::model::{StateVec, Transition};

/// A multi-step return split into its reward part and the states still
/// waiting for a bootstrap value.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedReturn {
    /// Discounted rewards, averaged over trajectories.
    pub rewards: f64,
    /// Unfinished trajectories: final state and its weight `gamma^k / T`.
    pub tails: Vec<(StateVec, f64)>,
}

impl PredictedReturn {
    pub fn evaluate<Q: QFunction + ?Sized>(&self, bootstrap: &Q) -> Result<f64> {
        let mut y = self.rewards;
        let mut seen: Vec<(&StateVec, f64)> = Vec::with_capacity(self.tails.len());
        for (s, w) in &self.tails {
            let q = match seen.iter().find(|(t, _)| t.bit_eq(s)) {
                Some(&(_, q)) => q,
                None => {
                    let q = bootstrap.max_q(s)?;
                    seen.push((s, q));
                    q
                }
            };
            y += w * q;
        }
        Ok(y)
    }
}

/// A stored transition, optionally carrying a TD target computed at insertion.
///
/// With a [`PredictedReturn`] attached, learners re-evaluate the bootstrap
/// part with their current parameters; `target` keeps the insertion-time value.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayRecord {
    pub transition: Transition,
    pub target: Option<f64>,
    pub prediction: Option<PredictedReturn>,
}

impl ReplayRecord {
    pub fn new(transition: Transition) -> Self {
        Self {
            transition,
            target: None,
            prediction: None,
        }
    }

    pub fn with_target(transition: Transition, target: f64) -> Self {
        Self {
            transition,
            target: Some(target),
            prediction: None,
        }
    }

    pub fn with_prediction(transition: Transition, prediction: PredictedReturn, target: f64) -> Self {
        Self {
            transition,
            target: Some(target),
            prediction: Some(prediction),
        }
    }
}

/// Fixed-capacity ring; once full the oldest record is evicted.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    records: VecDeque<ReplayRecord>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            records: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: ReplayRecord) {
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(record);
    }

    pub fn get(&self, i: usize) -> Option<&ReplayRecord> {
        self.records.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReplayRecord> {
        self.records.iter()
    }

    pub fn clear(&mut self) {
        self.records.clear();
    }

    /// Uniform sample with replacement.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, rng: &mut R, count: usize) -> Vec<&'a ReplayRecord> {
        if self.records.is_empty() {
            return Vec::new();
        }
        (0..count)
            .map(|_| &self.records[rng.random_range(0..self.records.len())])
            .collect()
    }
}
