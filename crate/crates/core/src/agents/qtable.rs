use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionId, StateVec, Transition};

/// Dense tabular action values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    states: usize,
    actions: usize,
    values: Vec<f64>,
    pub learning_rate: f64,
    pub discount: f64,
}

impl QTable {
    pub fn new(states: usize, actions: usize, init_q: f64, learning_rate: f64, discount: f64) -> Result<Self> {
        if states == 0 || actions == 0 {
            return Err(Error::Shape(format!("q-table {states} x {actions}")));
        }
        if !(learning_rate > 0.0 && learning_rate <= 1.0) || !(discount > 0.0 && discount <= 1.0) {
            return Err(Error::Config(format!(
                "learning rate {learning_rate} and discount {discount} must lie in (0, 1]"
            )));
        }
        if !init_q.is_finite() {
            return Err(Error::Config("init_q must be finite".into()));
        }
        Ok(Self {
            states,
            actions,
            values: vec![init_q; states * actions],
            learning_rate,
            discount,
        })
    }

    pub(crate) fn from_parts(
        states: usize,
        actions: usize,
        values: Vec<f64>,
        learning_rate: f64,
        discount: f64,
    ) -> Result<Self> {
        if values.len() != states * actions {
            return Err(Error::Shape(format!(
                "{} values for a {states} x {actions} table",
                values.len()
            )));
        }
        let mut table = Self::new(states, actions, 0.0, learning_rate, discount)?;
        table.values = values;
        Ok(table)
    }

    pub fn state_count(&self) -> usize {
        self.states
    }

    pub fn action_count(&self) -> usize {
        self.actions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.actions..(s + 1) * self.actions]
    }

    pub fn get(&self, s: usize, a: ActionId) -> f64 {
        self.values[s * self.actions + a.0]
    }

    pub fn set(&mut self, s: usize, a: ActionId, q: f64) {
        self.values[s * self.actions + a.0] = q;
    }

    pub(crate) fn index_of(&self, state: &StateVec) -> Result<usize> {
        match state.discrete_id {
            Some(id) if id < self.states => Ok(id),
            Some(id) => Err(Error::InvalidState(format!(
                "discrete state {id} outside table of {} states",
                self.states
            ))),
            None => Err(Error::InvalidState(
                "tabular agent needs a discrete state id".into(),
            )),
        }
    }

    /// Tabular backup; returns the TD error `target - Q_old(s, a)`.
    pub fn update(&mut self, t: &Transition, target_override: Option<f64>) -> Result<f64> {
        let s = self.index_of(&t.state)?;
        if t.action.0 >= self.actions {
            return Err(Error::InvalidAction {
                index: t.action.0,
                count: self.actions,
            });
        }
        let target = match target_override {
            Some(y) => y,
            None if t.terminal => t.reward,
            None => {
                let next = self.index_of(&t.next_state)?;
                let best = self.row(next).iter().copied().fold(f64::NEG_INFINITY, f64::max);
                t.reward + self.discount * best
            }
        };
        if !target.is_finite() {
            return Err(Error::Numeric(format!("non-finite TD target {target}")));
        }
        let old = self.get(s, t.action);
        let td = target - old;
        self.set(s, t.action, old + self.learning_rate * td);
        Ok(td)
    }
}
