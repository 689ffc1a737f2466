//! Learners: tabular Q-learning and a small deep Q-network. Both accept
//! externally supplied TD targets so twin strategies plug in unchanged.

pub mod mlp;
pub mod qtable;
pub mod replay;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ActionId, StateVec, Transition};

pub use mlp::{max_value, Adam, MlpParams, QSample};
pub use qtable::QTable;
pub use replay::{PredictedReturn, ReplayBuffer, ReplayRecord};

/// Anything that scores every action in a state.
pub trait QFunction {
    fn action_count(&self) -> usize;
    fn q_values(&self, state: &StateVec) -> Result<Vec<f64>>;

    fn max_q(&self, state: &StateVec) -> Result<f64> {
        Ok(max_value(&self.q_values(state)?))
    }
}

impl QFunction for QTable {
    fn action_count(&self) -> usize {
        QTable::action_count(self)
    }

    fn q_values(&self, state: &StateVec) -> Result<Vec<f64>> {
        Ok(self.row(self.index_of(state)?).to_vec())
    }
}

impl QFunction for MlpParams {
    fn action_count(&self) -> usize {
        MlpParams::action_count(self)
    }

    fn q_values(&self, state: &StateVec) -> Result<Vec<f64>> {
        self.forward(&state.values)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> ActionId {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    ActionId(best)
}

/// With probability `eps` a uniform action, otherwise the greedy one.
pub fn select_epsilon_greedy<Q, R>(q: &Q, state: &StateVec, eps: f64, rng: &mut R) -> Result<ActionId>
where
    Q: QFunction + ?Sized,
    R: Rng + ?Sized,
{
    epsilon_greedy_by(q.action_count(), eps, rng, || Ok(argmax(&q.q_values(state)?)))
}

/// The draw behind [`select_epsilon_greedy`]; `greedy` runs only when the draw exploits.
pub fn epsilon_greedy_by<R>(actions: usize, eps: f64, rng: &mut R, greedy: impl FnOnce() -> Result<ActionId>) -> Result<ActionId>
where
    R: Rng + ?Sized,
{
    let explore = rng.random::<f64>() < eps;
    if explore {
        Ok(ActionId(rng.random_range(0..actions)))
    } else {
        greedy()
    }
}

/// Linear exploration decay from `eps_start` to `eps_end` over `decay_episodes`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub eps_start: f64,
    pub eps_end: f64,
    pub decay_episodes: u64,
}

impl EpsilonSchedule {
    pub fn new(eps_start: f64, eps_end: f64, decay_episodes: u64) -> Result<Self> {
        let unit = 0.0..=1.0;
        if !unit.contains(&eps_start) || !unit.contains(&eps_end) || eps_start < eps_end {
            return Err(Error::Config(format!(
                "epsilon schedule needs 1 >= start >= end >= 0 (start={eps_start}, end={eps_end})"
            )));
        }
        if decay_episodes == 0 {
            return Err(Error::Config("epsilon decay must span >= 1 episode".into()));
        }
        Ok(Self {
            eps_start,
            eps_end,
            decay_episodes,
        })
    }

    pub fn value(&self, episode: u64) -> f64 {
        if episode >= self.decay_episodes {
            return self.eps_end;
        }
        let frac = episode as f64 / self.decay_episodes as f64;
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }
}

/// A copyable snapshot of an agent's learnable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AgentParams {
    Table(QTable),
    Mlp(MlpParams),
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"TWFGPRM1";

impl AgentParams {
    /// Deep copy. Mutating the copy never touches `self`.
    pub fn copy_params(&self) -> AgentParams {
        self.clone()
    }

    /// Little-endian checkpoint: magic, kind byte, size header, 64-bit reals.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = CHECKPOINT_MAGIC.to_vec();
        let put_u64 = |out: &mut Vec<u8>, v: u64| out.extend_from_slice(&v.to_le_bytes());
        match self {
            AgentParams::Table(q) => {
                out.push(0);
                put_u64(&mut out, q.state_count() as u64);
                put_u64(&mut out, q.action_count() as u64);
                out.extend_from_slice(&q.learning_rate.to_le_bytes());
                out.extend_from_slice(&q.discount.to_le_bytes());
                q.values()
                    .iter()
                    .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
            }
            AgentParams::Mlp(net) => {
                out.push(1);
                put_u64(&mut out, net.sizes().len() as u64);
                for &s in net.sizes() {
                    put_u64(&mut out, s as u64);
                }
                net.as_slice()
                    .iter()
                    .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic".into()));
        }
        let params = match r.take(1)?[0] {
            0 => {
                let states = r.usize()?;
                let actions = r.usize()?;
                let alpha = r.f64()?;
                let gamma = r.f64()?;
                let n = states
                    .checked_mul(actions)
                    .ok_or_else(|| Error::Checkpoint("table size overflow".into()))?;
                let values = r.f64s(n)?;
                AgentParams::Table(QTable::from_parts(states, actions, values, alpha, gamma)?)
            }
            1 => {
                let count = r.usize()?;
                if count > 64 {
                    return Err(Error::Checkpoint(format!("{count} layers")));
                }
                let sizes = (0..count).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
                let total = MlpParams::zeros(&sizes)?.param_count();
                let values = r.f64s(total)?;
                AgentParams::Mlp(MlpParams::from_parts(sizes, values)?)
            }
            k => return Err(Error::Checkpoint(format!("unknown parameter kind {k}"))),
        };
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes".into()));
        }
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

impl QFunction for AgentParams {
    fn action_count(&self) -> usize {
        match self {
            AgentParams::Table(q) => QFunction::action_count(q),
            AgentParams::Mlp(m) => QFunction::action_count(m),
        }
    }

    fn q_values(&self, state: &StateVec) -> Result<Vec<f64>> {
        match self {
            AgentParams::Table(q) => q.q_values(state),
            AgentParams::Mlp(m) => m.q_values(state),
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Checkpoint("size overflow".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QlConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub init_q: f64,
}

impl Default for QlConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            gamma: 0.95,
            init_q: 0.0,
        }
    }
}

/// Tabular learner plus per-(state, action) visit counts.
#[derive(Debug, Clone)]
pub struct QlAgent {
    pub table: QTable,
    visits: Vec<u64>,
}

impl QlAgent {
    pub fn new(states: usize, actions: usize, config: &QlConfig) -> Result<Self> {
        Ok(Self {
            table: QTable::new(states, actions, config.init_q, config.alpha, config.gamma)?,
            visits: vec![0; states * actions],
        })
    }

    pub fn visits(&self, s: usize, a: ActionId) -> u64 {
        self.visits[s * self.table.action_count() + a.0]
    }

    /// Update from one transition and count the visit.
    pub fn learn(&mut self, t: &Transition, target: Option<f64>) -> Result<f64> {
        let td = self.table.update(t, target)?;
        let s = self.table.index_of(&t.state)?;
        let actions = self.table.action_count();
        self.visits[s * actions + t.action.0] += 1;
        Ok(td)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Online updates between target-network copies.
    pub target_sync: u64,
    pub gamma: f64,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            replay_capacity: 50_000,
            batch_size: 64,
            lr: 1e-3,
            target_sync: 500,
            gamma: 0.95,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0)
            || self.replay_capacity == 0
            || self.batch_size == 0
            || self.target_sync == 0
        {
            return Err(Error::Config("DQN sizes must be positive".into()));
        }
        if !(self.lr > 0.0) || !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("DQN needs lr > 0 and gamma in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Online network, target network and optimizer state.
#[derive(Debug, Clone)]
pub struct DqnAgent {
    pub online: MlpParams,
    pub target: MlpParams,
    adam: Adam,
    config: DqnConfig,
    updates: u64,
    target_version: u64,
    scratch: Vec<f64>,
}

impl DqnAgent {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, actions: usize, config: DqnConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut sizes = vec![input_dim];
        sizes.extend(&config.hidden);
        sizes.push(actions);
        let online = MlpParams::init(&sizes, rng)?;
        Ok(Self {
            target: online.clone(),
            adam: Adam::new(online.param_count()),
            online,
            config,
            updates: 0,
            target_version: 0,
            scratch: Vec::new(),
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Incremented whenever the target network is refreshed.
    pub fn target_version(&self) -> u64 {
        self.target_version
    }

    /// One gradient step on `batch`. Records without a stored target use
    /// `r + gamma * max_a Q_target(s', a)` (zero bootstrap on terminal);
    /// records with a [`PredictedReturn`] get their tails re-bootstrapped
    /// from the target network.
    pub fn learn(&mut self, batch: &[&ReplayRecord]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyGroup);
        }
        let actions = self.online.action_count();
        let mut targets: Vec<f64> = Vec::with_capacity(batch.len());
        // (record, weight) for every state needing max_a Q_target
        let mut owners: Vec<(usize, f64)> = Vec::new();
        let mut next: Vec<f64> = Vec::new();
        for (i, r) in batch.iter().enumerate() {
            let t = &r.transition;
            match (&r.prediction, r.target) {
                (Some(p), _) => {
                    targets.push(p.rewards);
                    for (s, w) in &p.tails {
                        owners.push((i, *w));
                        next.extend_from_slice(&s.values);
                    }
                }
                (None, Some(y)) => targets.push(y),
                (None, None) => {
                    targets.push(t.reward);
                    if !t.terminal {
                        owners.push((i, self.config.gamma));
                        next.extend_from_slice(&t.next_state.values);
                    }
                }
            }
        }
        if !owners.is_empty() {
            let (q_next, map) = self.target.forward_distinct(&next, owners.len())?;
            let best: Vec<f64> = q_next.chunks_exact(actions).map(max_value).collect();
            for (&(i, w), &j) in owners.iter().zip(&map) {
                let best = best[j];
                targets[i] += w * best;
            }
        }
        let samples: Vec<QSample> = batch
            .iter()
            .zip(&targets)
            .map(|(r, &target)| QSample {
                state: &r.transition.state.values,
                action: r.transition.action,
                target,
            })
            .collect();
        let loss = self
            .online
            .train_step(&mut self.adam, &samples, self.config.lr, &mut self.scratch)?;
        self.updates += 1;
        if self.updates % self.config.target_sync == 0 {
            self.target.clone_from(&self.online);
            self.target_version += 1;
        }
        Ok(loss)
    }
}
