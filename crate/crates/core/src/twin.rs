//! The digital space: one identical domain that mirrors the physical
//! environment step for step, plus divergent domains restored from snapshots
//! to try alternative actions and to roll the twin policy forward.

use std::sync::Arc;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::agents::{argmax, epsilon_greedy_by, AgentParams, PredictedReturn, QFunction, ReplayBuffer, ReplayRecord};
use crate::env::{EnvSnapshot, Environment};
use crate::error::{Error, Result};
use crate::model::{transition_average, ActionId, DomainId, DomainRole, StateVec, Transition, TransitionKind};
use crate::rng::RngStream;

/// Additive Gaussian corruption of twin-generated data.
///
/// Per-feature vectors of length 1 broadcast to every feature; empty vectors mean zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub state_noise_std: Vec<f64>,
    pub reward_noise_std: f64,
    pub bias: Vec<f64>,
}

fn broadcast(v: &[f64], i: usize) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        _ => v.get(i).copied().unwrap_or(0.0),
    }
}

impl NoiseModel {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn gaussian(state_std: f64, reward_std: f64) -> Self {
        Self {
            state_noise_std: vec![state_std],
            reward_noise_std: reward_std,
            bias: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let stds_ok = self
            .state_noise_std
            .iter()
            .chain(std::iter::once(&self.reward_noise_std))
            .all(|s| s.is_finite() && *s >= 0.0);
        if !stds_ok || self.bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("noise stds must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.reward_noise_std == 0.0
            && self.state_noise_std.iter().all(|&s| s == 0.0)
            && self.bias.iter().all(|&b| b == 0.0)
    }
}

fn gaussian(std: f64, rng: &mut RngStream) -> f64 {
    Normal::new(0.0, std).expect("std validated").sample(rng)
}

/// Corrupt `next_state` and `reward`; `state` and `action` are untouched.
/// Zero components consume no randomness and leave values bit-identical.
pub fn apply_noise(mut t: Transition, noise: &NoiseModel, rng: &mut RngStream) -> Transition {
    if noise.is_zero() {
        return t;
    }
    for (i, v) in t.next_state.values.iter_mut().enumerate() {
        let bias = broadcast(&noise.bias, i);
        let std = broadcast(&noise.state_noise_std, i);
        if bias != 0.0 {
            *v += bias;
        }
        if std > 0.0 {
            *v += gaussian(std, rng);
        }
    }
    if noise.reward_noise_std > 0.0 {
        t.reward += gaussian(noise.reward_noise_std, rng);
    }
    t
}

/// Parameters the twin agent acts and bootstraps with; refreshed from the
/// physical agent after every update.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinAgent {
    pub policy: AgentParams,
    /// Shared between syncs until the physical bootstrap parameters change.
    pub bootstrap: Arc<AgentParams>,
    pub epsilon: f64,
}

/// One environment replica inside the digital space.
#[derive(Debug, Clone)]
pub struct DigitalDomain<E> {
    pub id: DomainId,
    pub env: E,
    dynamics: RngStream,
    pub noise: NoiseModel,
    noise_rng: RngStream,
    pub buffer: ReplayBuffer,
    pub twin_params: Option<Arc<TwinAgent>>,
}

impl<E: Environment> DigitalDomain<E> {
    /// The mirror domain: an exact copy of the physical environment and of its
    /// dynamics stream, with no noise.
    pub fn identical(env: E, dynamics: RngStream, capacity: usize) -> Self {
        let noise_rng = dynamics.fork("mirror-noise");
        Self {
            id: DomainId::IDENTICAL,
            env,
            dynamics,
            noise: NoiseModel::zero(),
            noise_rng,
            buffer: ReplayBuffer::new(capacity),
            twin_params: None,
        }
    }

    pub fn divergent(index: usize, env: E, seed: u64, noise: NoiseModel, capacity: usize) -> Result<Self> {
        noise.validate()?;
        Ok(Self {
            id: DomainId::divergent(index),
            env,
            dynamics: RngStream::new(seed, format!("twin-dynamics/{index}")),
            noise,
            noise_rng: RngStream::new(seed, format!("noise/{index}")),
            buffer: ReplayBuffer::new(capacity),
            twin_params: None,
        })
    }

    pub fn role(&self) -> DomainRole {
        self.id.role
    }

    /// Restore `snapshot`, take `action`, corrupt the result with this domain's noise.
    pub fn trial(&mut self, snapshot: &EnvSnapshot<E>, action: ActionId, kind: TransitionKind) -> Result<Transition> {
        self.env.restore(snapshot);
        let state = self.env.observe();
        let out = self.env.step(action, &mut self.dynamics)?;
        let t = Transition {
            state,
            action,
            reward: out.reward,
            next_state: out.next_state,
            terminal: out.terminal,
            domain: self.id,
            kind,
        };
        Ok(apply_noise(t, &self.noise, &mut self.noise_rng))
    }
}

/// Re-execute the physical action in the identical domain and verify
/// bit-exact agreement; on success the physical record joins the mirror buffer.
pub fn sync_identical<E: Environment>(physical: &Transition, domain: &mut DigitalDomain<E>, step: u64) -> Result<()> {
    if domain.role() != DomainRole::Identical {
        return Err(Error::Config("sync_identical needs the identical domain".into()));
    }
    let diverged = |detail: String| Error::MirrorDivergence { step, detail };
    let state = domain.env.observe();
    if !state.bit_eq(&physical.state) {
        return Err(diverged(format!(
            "pre-state {:?} != physical {:?}",
            state.values, physical.state.values
        )));
    }
    let out = domain
        .env
        .step(physical.action, &mut domain.dynamics)
        .map_err(|e| diverged(format!("mirror step failed: {e}")))?;
    if !out.next_state.bit_eq(&physical.next_state) {
        return Err(diverged(format!(
            "next state {:?} != physical {:?}",
            out.next_state.values, physical.next_state.values
        )));
    }
    if out.reward.to_bits() != physical.reward.to_bits() || out.terminal != physical.terminal {
        return Err(diverged(format!(
            "reward/terminal ({}, {}) != physical ({}, {})",
            out.reward, out.terminal, physical.reward, physical.terminal
        )));
    }
    domain.buffer.push(ReplayRecord::new(physical.clone()));
    Ok(())
}

fn sorted_distinct(actions: &[ActionId], action_count: usize) -> Result<Vec<ActionId>> {
    if actions.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let mut sorted = actions.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("fanout actions must be distinct".into()));
    }
    if let Some(bad) = sorted.iter().find(|a| a.0 >= action_count) {
        return Err(Error::InvalidAction {
            index: bad.0,
            count: action_count,
        });
    }
    Ok(sorted)
}

/// Execute each distinct action once from `snapshot`, one divergent domain
/// per action (domains are reused round-robin). Output follows action index order.
pub fn fanout_trials<E: Environment>(
    snapshot: &EnvSnapshot<E>,
    actions: &[ActionId],
    domains: &mut [DigitalDomain<E>],
) -> Result<Vec<Transition>> {
    fanout_averaged(snapshot, actions, domains, 1)
}

/// Like [`fanout_trials`], but every action is tried in `replicas` domains
/// and the noisy results are averaged into one AGGREGATE transition.
pub fn fanout_averaged<E: Environment>(
    snapshot: &EnvSnapshot<E>,
    actions: &[ActionId],
    domains: &mut [DigitalDomain<E>],
    replicas: usize,
) -> Result<Vec<Transition>> {
    if domains.is_empty() {
        return Err(Error::Config("fanout needs at least one divergent domain".into()));
    }
    if replicas == 0 {
        return Err(Error::Config("replicas must be >= 1".into()));
    }
    let actions = sorted_distinct(actions, snapshot.env().action_count())?;
    let len = domains.len();
    let mut out = Vec::with_capacity(actions.len());
    for (i, &action) in actions.iter().enumerate() {
        let mut group = Vec::with_capacity(replicas);
        for r in 0..replicas {
            let domain = &mut domains[(i * replicas + r) % len];
            group.push(domain.trial(snapshot, action, TransitionKind::TwinFanout)?);
        }
        let t = if replicas == 1 {
            group.pop().expect("one replica")
        } else {
            transition_average(&group)?
        };
        domains[(i * replicas) % len].buffer.push(ReplayRecord::new(t.clone()));
        out.push(t);
    }
    Ok(out)
}

/// The physical step whose long-term value is being predicted.
#[derive(Debug, Clone)]
pub struct FirstStep<E> {
    pub action: ActionId,
    pub reward: f64,
    pub terminal: bool,
    /// Environment right after the first action.
    pub next: EnvSnapshot<E>,
}

/// Rollout settings for [`predict_target`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookahead {
    pub depth: usize,
    pub trajectories: usize,
    pub gamma: f64,
    /// Exploration rate of the rollout policy.
    pub epsilon: f64,
}

impl Lookahead {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.trajectories == 0 {
            return Err(Error::Config("prediction needs k >= 1 and T >= 1".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        Ok(())
    }
}

/// Roll out the trajectories behind a k-step target without bootstrapping.
///
/// Each of `T` trajectories restarts from the post-first-action snapshot and
/// follows the epsilon-greedy `policy` for `k - 1` more steps. The reward part
/// `r_0 + sum_i gamma^i r_i` is averaged over trajectories; every trajectory
/// still running after `k` steps leaves its final state with weight `gamma^k / T`.
pub fn predict_return<E, P>(
    first: &FirstStep<E>,
    policy: &P,
    lookahead: Lookahead,
    domains: &mut [DigitalDomain<E>],
    rollout_rng: &mut RngStream,
) -> Result<PredictedReturn>
where
    E: Environment,
    P: QFunction + ?Sized,
{
    lookahead.validate()?;
    let gamma = lookahead.gamma;
    if first.terminal {
        return Ok(PredictedReturn {
            rewards: first.reward,
            tails: Vec::new(),
        });
    }
    if lookahead.depth == 1 {
        return Ok(PredictedReturn {
            rewards: first.reward,
            tails: vec![(first.next.env().observe(), gamma)],
        });
    }
    if domains.is_empty() {
        return Err(Error::Config("prediction needs at least one divergent domain".into()));
    }
    let len = domains.len();
    let trajectories = lookahead.trajectories as f64;
    let mut total = 0.0;
    let mut tails = Vec::new();
    // trajectories often revisit the same states; the policy is fixed here
    let mut greedy: Vec<(StateVec, ActionId)> = Vec::new();
    for j in 0..lookahead.trajectories {
        let domain = &mut domains[j % len];
        domain.env.restore(&first.next);
        let mut obs: StateVec = domain.env.observe();
        let mut ret = first.reward;
        let mut discount = 1.0;
        let mut ended = false;
        for _ in 1..lookahead.depth {
            let action = epsilon_greedy_by(policy.action_count(), lookahead.epsilon, rollout_rng, || {
                if let Some((_, a)) = greedy.iter().find(|(s, _)| s.bit_eq(&obs)) {
                    return Ok(*a);
                }
                let a = argmax(&policy.q_values(&obs)?);
                greedy.push((obs.clone(), a));
                Ok(a)
            })?;
            let out = domain.env.step(action, &mut domain.dynamics)?;
            let t = apply_noise(
                Transition {
                    state: obs,
                    action,
                    reward: out.reward,
                    next_state: out.next_state,
                    terminal: out.terminal,
                    domain: domain.id,
                    kind: TransitionKind::TwinRollout,
                },
                &domain.noise,
                &mut domain.noise_rng,
            );
            discount *= gamma;
            ret += discount * t.reward;
            obs = t.next_state;
            if t.terminal {
                ended = true;
                break;
            }
        }
        if !ended {
            tails.push((obs, discount * gamma / trajectories));
        }
        total += ret;
    }
    Ok(PredictedReturn {
        rewards: total / trajectories,
        tails,
    })
}

/// Trajectory-averaged k-step TD target: [`predict_return`] bootstrapped
/// with `max_a bootstrap(s_k, a)`, the bootstrap dropped once the episode ends.
pub fn predict_target<E, P, B>(
    first: &FirstStep<E>,
    policy: &P,
    bootstrap: &B,
    lookahead: Lookahead,
    domains: &mut [DigitalDomain<E>],
    rollout_rng: &mut RngStream,
) -> Result<f64>
where
    E: Environment,
    P: QFunction + ?Sized,
    B: QFunction + ?Sized,
{
    let target = predict_return(first, policy, lookahead, domains, rollout_rng)?.evaluate(bootstrap)?;
    if !target.is_finite() {
        return Err(Error::Numeric(format!("non-finite predicted target {target}")));
    }
    Ok(target)
}

/// The whole digital space: mirror domain, divergent domains, twin agent.
#[derive(Debug, Clone)]
pub struct TwinSpace<E> {
    pub mirror: Option<DigitalDomain<E>>,
    pub divergent: Vec<DigitalDomain<E>>,
    rollout_rng: RngStream,
    twin: Option<Arc<TwinAgent>>,
    mirror_steps: u64,
}

impl<E: Environment> TwinSpace<E> {
    /// Build `domains` divergent replicas of `physical`. When `mirror` is set,
    /// the identical domain clones the physical env and its dynamics stream.
    pub fn new(
        physical: &E,
        physical_dynamics: &RngStream,
        seed: u64,
        domains: usize,
        noise: NoiseModel,
        capacity: usize,
        mirror: bool,
    ) -> Result<Self> {
        let divergent = (0..domains)
            .map(|i| DigitalDomain::divergent(i, physical.clone(), seed, noise.clone(), capacity))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mirror: mirror.then(|| DigitalDomain::identical(physical.clone(), physical_dynamics.clone(), capacity)),
            divergent,
            rollout_rng: RngStream::new(seed, "rollout"),
            twin: None,
            mirror_steps: 0,
        })
    }

    /// Reset the mirror in lockstep with the physical environment.
    pub fn begin_episode(&mut self) -> Result<()> {
        if let Some(m) = &mut self.mirror {
            m.env.reset()?;
        }
        Ok(())
    }

    pub fn mirror_step(&mut self, physical: &Transition) -> Result<()> {
        self.mirror_steps += 1;
        match &mut self.mirror {
            Some(m) => sync_identical(physical, m, self.mirror_steps),
            None => Ok(()),
        }
    }

    /// Global (unmasked) state seen through the identical domain.
    pub fn global_observation(&self) -> Option<StateVec> {
        self.mirror.as_ref().map(|m| m.env.full_state())
    }

    /// Copy the physical agent's parameters into every domain.
    pub fn sync_twin(&mut self, policy: &AgentParams, bootstrap: &AgentParams, epsilon: f64) {
        let twin = Arc::new(TwinAgent {
            policy: policy.copy_params(),
            bootstrap: Arc::new(bootstrap.copy_params()),
            epsilon,
        });
        self.install(twin);
    }

    /// Rewrite the acting policy in place, keeping the current bootstrap copy.
    pub fn update_policy(&mut self, epsilon: f64, write: impl FnOnce(&mut AgentParams)) {
        let Some(mut twin) = self.twin.take() else {
            return;
        };
        for d in self.divergent.iter_mut().chain(self.mirror.iter_mut()) {
            d.twin_params = None;
        }
        let t = Arc::make_mut(&mut twin);
        write(&mut t.policy);
        t.epsilon = epsilon;
        self.install(twin);
    }

    fn install(&mut self, twin: Arc<TwinAgent>) {
        for d in self.divergent.iter_mut().chain(self.mirror.iter_mut()) {
            d.twin_params = Some(Arc::clone(&twin));
        }
        self.twin = Some(twin);
    }

    pub fn twin(&self) -> Option<&TwinAgent> {
        self.twin.as_deref()
    }

    pub fn fanout(&mut self, snapshot: &EnvSnapshot<E>, actions: &[ActionId], replicas: usize) -> Result<Vec<Transition>> {
        fanout_averaged(snapshot, actions, &mut self.divergent, replicas)
    }

    /// Predict with the synced twin agent.
    /// Roll out with the twin policy; returns the split return and its value
    /// under the twin's current bootstrap parameters.
    pub fn predict(
        &mut self,
        first: &FirstStep<E>,
        depth: usize,
        trajectories: usize,
        gamma: f64,
    ) -> Result<(PredictedReturn, f64)> {
        let twin = self
            .twin
            .clone()
            .ok_or_else(|| Error::Config("twin agent not synced".into()))?;
        let lookahead = Lookahead {
            depth,
            trajectories,
            gamma,
            epsilon: twin.epsilon,
        };
        let p = predict_return(first, &twin.policy, lookahead, &mut self.divergent, &mut self.rollout_rng)?;
        let target = p.evaluate(twin.bootstrap.as_ref())?;
        if !target.is_finite() {
            return Err(Error::Numeric(format!("non-finite predicted target {target}")));
        }
        Ok((p, target))
    }

    /// All divergent-domain records, domain by domain.
    pub fn twin_records(&self) -> impl Iterator<Item = &ReplayRecord> {
        self.divergent.iter().flat_map(|d| d.buffer.iter())
    }

    pub fn twin_len(&self) -> usize {
        self.divergent.iter().map(|d| d.buffer.len()).sum()
    }

    /// Record `i` of the concatenated divergent buffers.
    pub fn twin_record(&self, mut i: usize) -> Option<&ReplayRecord> {
        for d in &self.divergent {
            if i < d.buffer.len() {
                return d.buffer.get(i);
            }
            i -= d.buffer.len();
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::QTable;
    use crate::env::{UrllcConfig, UrllcEnv};

    fn uav_first_step(seed: u64) -> (crate::env::UavEnv, FirstStep<crate::env::UavEnv>) {
        use crate::env::{UavConfig, UavEnv};
        let cfg = UavConfig {
            uavs: 2,
            users: 3,
            horizon: 6,
            ..UavConfig::default()
        };
        let mut env = UavEnv::new(cfg, seed).unwrap();
        env.reset().unwrap();
        let out = env.step(ActionId(6), &mut RngStream::new(seed, "env-dynamics")).unwrap();
        let first = FirstStep {
            action: ActionId(6),
            reward: out.reward,
            terminal: out.terminal,
            next: env.snapshot(),
        };
        (env, first)
    }

    #[test]
    fn split_return_evaluates_to_predicted_target() {
        use crate::agents::MlpParams;
        let (env, first) = uav_first_step(3);
        let mut rng = RngStream::new(3, "agent-init");
        let policy = MlpParams::init(&[4, 8, 25], &mut rng).unwrap();
        let bootstrap = MlpParams::init(&[4, 8, 25], &mut rng).unwrap();
        for depth in [1, 2, 4, 9] {
            let la = Lookahead {
                depth,
                trajectories: 3,
                gamma: 0.9,
                epsilon: 0.3,
            };
            let mk = || {
                (0..2)
                    .map(|i| DigitalDomain::divergent(i, env.clone(), 3, NoiseModel::zero(), 10).unwrap())
                    .collect::<Vec<_>>()
            };
            let (mut da, mut db) = (mk(), mk());
            let (mut ra, mut rb) = (RngStream::new(3, "rollout"), RngStream::new(3, "rollout"));
            let p = predict_return(&first, &policy, la, &mut da, &mut ra).unwrap();
            let y = predict_target(&first, &policy, &bootstrap, la, &mut db, &mut rb).unwrap();
            assert_eq!(p.evaluate(&bootstrap).unwrap(), y);
            // rollouts past the 5 remaining steps all end, so nothing is left to bootstrap
            if depth == 9 {
                assert!(p.tails.is_empty());
            } else {
                assert_eq!(p.tails.len(), if depth == 1 { 1 } else { 3 });
            }
        }
    }

    #[test]
    fn terminal_first_step_is_its_reward() {
        let (env, mut first) = uav_first_step(4);
        first.terminal = true;
        let q = crate::agents::MlpParams::zeros(&[4, 25]).unwrap();
        let mut domains = vec![DigitalDomain::divergent(0, env, 4, NoiseModel::zero(), 10).unwrap()];
        let la = Lookahead {
            depth: 5,
            trajectories: 4,
            gamma: 0.9,
            epsilon: 0.0,
        };
        let p = predict_return(&first, &q, la, &mut domains, &mut RngStream::new(4, "rollout")).unwrap();
        assert_eq!(p.rewards, first.reward);
        assert!(p.tails.is_empty());
    }

    #[test]
    fn zero_noise_is_identity() {
        let t = Transition {
            state: StateVec::new(vec![1.0]),
            action: ActionId(0),
            reward: -0.0,
            next_state: StateVec::new(vec![-0.0, 2.0]),
            terminal: false,
            domain: DomainId::divergent(0),
            kind: TransitionKind::TwinFanout,
        };
        let mut rng = RngStream::new(0, "noise");
        let before = rng.clone();
        let out = apply_noise(t.clone(), &NoiseModel::zero(), &mut rng);
        assert!(out.same_outcome(&t));
        assert!(out.reward.is_sign_negative());
        assert_eq!(rng, before);
    }

    #[test]
    fn bias_only_is_deterministic() {
        let t = Transition {
            state: StateVec::new(vec![1.0]),
            action: ActionId(0),
            reward: 3.0,
            next_state: StateVec::new(vec![1.0, 2.0]),
            terminal: false,
            domain: DomainId::divergent(0),
            kind: TransitionKind::TwinFanout,
        };
        let noise = NoiseModel {
            bias: vec![0.5, -1.0],
            ..NoiseModel::zero()
        };
        for seed in [0, 1, 999] {
            let out = apply_noise(t.clone(), &noise, &mut RngStream::new(seed, "noise"));
            assert_eq!(out.next_state.values, vec![1.5, 1.0]);
            assert_eq!(out.reward, 3.0);
            assert_eq!(out.state, t.state);
        }
    }

    #[test]
    fn gaussian_noise_std() {
        let t = Transition {
            state: StateVec::new(vec![0.0]),
            action: ActionId(0),
            reward: 0.0,
            next_state: StateVec::new(vec![0.0]),
            terminal: false,
            domain: DomainId::divergent(0),
            kind: TransitionKind::TwinFanout,
        };
        let noise = NoiseModel::gaussian(0.5, 0.5);
        let mut rng = RngStream::new(8, "noise");
        let n = 10_000;
        let (mut s, mut ss, mut r, mut rr) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let out = apply_noise(t.clone(), &noise, &mut rng);
            s += out.next_state.values[0];
            ss += out.next_state.values[0].powi(2);
            r += out.reward;
            rr += out.reward.powi(2);
        }
        let n = n as f64;
        let sd = (ss / n - (s / n).powi(2)).sqrt();
        let rd = (rr / n - (r / n).powi(2)).sqrt();
        assert!((sd - 0.5).abs() < 0.01, "state std {sd}");
        assert!((rd - 0.5).abs() < 0.01, "reward std {rd}");
    }

    #[test]
    fn negative_std_rejected() {
        assert!(NoiseModel::gaussian(-1.0, 0.0).validate().is_err());
    }

    fn urllc_space(domains: usize) -> (UrllcEnv, TwinSpace<UrllcEnv>) {
        let mut env = UrllcEnv::new(UrllcConfig::default(), 3).unwrap();
        env.reset().unwrap();
        let dynamics = RngStream::new(3, "env-dynamics");
        let space = TwinSpace::new(&env, &dynamics, 3, domains, NoiseModel::zero(), 100, true).unwrap();
        (env, space)
    }

    #[test]
    fn fanout_rejects_bad_action_sets() {
        let (env, mut space) = urllc_space(2);
        let snap = env.snapshot();
        assert_eq!(space.fanout(&snap, &[], 1).unwrap_err().code(), "EMPTY_GROUP");
        let dup = [ActionId(1), ActionId(1)];
        assert!(space.fanout(&snap, &dup, 1).is_err());
        let five: Vec<ActionId> = (0..5).map(ActionId).collect();
        assert!(space.fanout(&snap, &five, 1).is_err());
    }

    #[test]
    fn fanout_output_sorted_and_shared_state() {
        let (env, mut space) = urllc_space(2);
        let snap = env.snapshot();
        let ts = space.fanout(&snap, &[ActionId(3), ActionId(0), ActionId(2)], 1).unwrap();
        let order: Vec<usize> = ts.iter().map(|t| t.action.0).collect();
        assert_eq!(order, vec![0, 2, 3]);
        assert!(ts.iter().all(|t| t.state == env.observe()));
        assert!(ts.iter().all(|t| t.kind == TransitionKind::TwinFanout));
        assert_eq!(space.twin_len(), 3);
        // the physical env is untouched
        assert_eq!(env.snapshot(), snap);
    }

    #[test]
    fn single_zero_noise_trial_matches_physical_step() {
        let (env, mut space) = urllc_space(1);
        let snap = env.snapshot();
        let ts = space.fanout(&snap, &[ActionId(1)], 1).unwrap();
        let mut phys = env.clone();
        let out = phys.step(ActionId(1), &mut RngStream::new(3, "env-dynamics")).unwrap();
        assert_eq!(ts[0].reward, out.reward);
        assert_eq!(ts[0].next_state, out.next_state);
    }

    #[test]
    fn mirror_detects_perturbation() {
        let (env, _) = urllc_space(0);
        let mut perturbed = env.clone();
        perturbed.set_vehicle(env.state().vehicle_pos + 1.0);
        let mut mirror = DigitalDomain::identical(perturbed, RngStream::new(3, "env-dynamics"), 10);
        let mut phys = env.clone();
        let state = phys.observe();
        let out = phys.step(ActionId(0), &mut RngStream::new(3, "env-dynamics")).unwrap();
        let t = Transition::physical(state, ActionId(0), out.reward, out.next_state, out.terminal).unwrap();
        let err = sync_identical(&t, &mut mirror, 1).unwrap_err();
        assert_eq!(err.code(), "MIRROR_DIVERGENCE");
        assert!(mirror.buffer.is_empty());
    }

    #[test]
    fn sync_identical_requires_identical_role() {
        let (env, mut space) = urllc_space(1);
        let mut phys = env.clone();
        let state = phys.observe();
        let out = phys.step(ActionId(0), &mut RngStream::new(3, "env-dynamics")).unwrap();
        let t = Transition::physical(state, ActionId(0), out.reward, out.next_state, out.terminal).unwrap();
        assert!(sync_identical(&t, &mut space.divergent[0], 1).is_err());
    }

    #[test]
    fn twin_sync_copies_and_detaches() {
        let (_, mut space) = urllc_space(2);
        let mut physical = AgentParams::Table(QTable::new(4, 2, 0.0, 0.1, 0.9).unwrap());
        space.sync_twin(&physical, &physical, 0.3);
        for d in &space.divergent {
            assert_eq!(d.twin_params.as_ref().unwrap().policy, physical);
        }
        if let AgentParams::Table(q) = &mut physical {
            q.set(0, ActionId(0), 9.0);
        }
        assert_ne!(space.twin().unwrap().policy, physical);
        assert_eq!(space.twin().unwrap().epsilon, 0.3);
    }

    #[test]
    fn global_observation_exposes_full_state() {
        let (env, space) = urllc_space(0);
        let full = space.global_observation().unwrap();
        assert_eq!(full, env.full_state());
        assert!(full.dim() > env.observation_dim());
    }
}
