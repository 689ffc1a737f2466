//! Multi-UAV coverage: a central controller flies `M` UAVs over `U` fixed
//! users; each user is served by whichever UAV offers it the best Friis rate.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::model::{ActionId, StateVec};
use crate::rng::RngStream;

/// Free-space link parameters shared by every UAV-user pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Watts.
    pub tx_power: f64,
    /// Watts per hertz.
    pub noise_psd: f64,
    /// Hertz, per user (OFDM subchannels do not interfere).
    pub bandwidth: f64,
    /// Meters.
    pub carrier_wavelength: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
}

/// Convert a power spectral density in dBm/Hz to W/Hz.
pub fn dbm_per_hz_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            tx_power: 0.1,
            noise_psd: dbm_per_hz_to_watts(-174.0),
            bandwidth: 1e6,
            carrier_wavelength: 0.125,
            tx_gain: 1.0,
            rx_gain: 1.0,
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.tx_power,
            self.noise_psd,
            self.bandwidth,
            self.carrier_wavelength,
            self.tx_gain,
            self.rx_gain,
        ];
        if fields.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config("link budget fields must be finite and > 0".into()))
        }
    }

    /// Received power in watts at distance `d` meters.
    pub fn received_power(&self, d: f64) -> f64 {
        let path = self.carrier_wavelength / (4.0 * PI * d);
        self.tx_power * self.tx_gain * self.rx_gain * path * path
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_psd * self.bandwidth
    }
}

/// Shannon rate (bits/s) of a free-space link of length `d` meters.
pub fn friis_rate(d: f64, lb: &LinkBudget) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::InvalidDistance(d));
    }
    Ok(lb.bandwidth * (1.0 + lb.received_power(d) / lb.noise_power()).log2())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavConfig {
    /// Arena width and height in meters; positions live in `[0, w] x [0, h]`.
    pub arena: [f64; 2],
    pub hangar: [f64; 2],
    pub uavs: usize,
    pub users: usize,
    pub horizon: u32,
    /// Flight altitude in meters.
    pub height: f64,
    /// Meters per second.
    pub speed: f64,
    /// Seconds per step.
    pub dt: f64,
    pub link: LinkBudget,
}

impl Default for UavConfig {
    fn default() -> Self {
        Self {
            arena: [100.0, 100.0],
            hangar: [0.0, 0.0],
            uavs: 4,
            users: 10,
            horizon: 100,
            height: 5.0,
            speed: 8.0,
            dt: 1.0,
            link: LinkBudget::default(),
        }
    }
}

impl UavConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.arena[0] > 0.0 && self.arena[1] > 0.0) {
            return bad("arena dimensions must be > 0");
        }
        if !(0.0..=self.arena[0]).contains(&self.hangar[0])
            || !(0.0..=self.arena[1]).contains(&self.hangar[1])
        {
            return bad("hangar must lie inside the arena");
        }
        if self.uavs == 0 || self.users == 0 {
            return bad("need at least one UAV and one user");
        }
        if self.uavs > 8 {
            return bad("joint action space supports at most 8 UAVs");
        }
        if self.horizon == 0 {
            return bad("horizon must be >= 1");
        }
        if !(self.height > 0.0 && self.speed >= 0.0 && self.dt > 0.0) {
            return bad("height and dt must be > 0, speed >= 0");
        }
        self.link.validate()
    }

    /// Normalizer that maps the best possible per-user rate (UAV directly overhead) to 1.
    pub fn rate_scale(&self) -> f64 {
        friis_rate(self.height, &self.link).expect("height validated > 0")
    }

    pub fn action_count(&self) -> usize {
        UavMove::COUNT.pow(self.uavs as u32)
    }
}

/// Per-UAV move; one base-5 digit of the joint action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UavMove {
    Hover,
    PosX,
    NegX,
    PosY,
    NegY,
}

impl UavMove {
    pub const COUNT: usize = 5;
    const ALL: [UavMove; 5] = [
        UavMove::Hover,
        UavMove::PosX,
        UavMove::NegX,
        UavMove::PosY,
        UavMove::NegY,
    ];

    fn direction(self) -> [f64; 2] {
        match self {
            UavMove::Hover => [0.0, 0.0],
            UavMove::PosX => [1.0, 0.0],
            UavMove::NegX => [-1.0, 0.0],
            UavMove::PosY => [0.0, 1.0],
            UavMove::NegY => [0.0, -1.0],
        }
    }

    fn digit(self) -> usize {
        self as usize
    }
}

/// Decode a joint action: digit `m` (least significant first) is UAV `m`'s move.
pub fn decode_joint_action(index: usize, uavs: usize) -> Vec<UavMove> {
    let mut rest = index;
    (0..uavs)
        .map(|_| {
            let m = UavMove::ALL[rest % UavMove::COUNT];
            rest /= UavMove::COUNT;
            m
        })
        .collect()
}

pub fn encode_joint_action(moves: &[UavMove]) -> usize {
    moves
        .iter()
        .rev()
        .fold(0, |acc, m| acc * UavMove::COUNT + m.digit())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavEnvState {
    pub uav_pos: Vec<[f64; 2]>,
    pub user_pos: Vec<[f64; 2]>,
    pub t: u32,
    pub horizon: u32,
}

/// Mean over users of the best-UAV rate, divided by `rate_scale`.
pub fn uav_reward(state: &UavEnvState, height: f64, lb: &LinkBudget, rate_scale: f64) -> f64 {
    let mut per_user: Vec<f64> = state
        .user_pos
        .iter()
        .map(|u| {
            state
                .uav_pos
                .iter()
                .map(|p| {
                    let (dx, dy) = (p[0] - u[0], p[1] - u[1]);
                    let d = (dx * dx + dy * dy + height * height).sqrt();
                    friis_rate(d, lb).expect("height keeps distance positive")
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    // sorted summation keeps the mean invariant under user permutations
    per_user.sort_by(f64::total_cmp);
    per_user.iter().sum::<f64>() / per_user.len() as f64 / rate_scale
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavEnv {
    config: Arc<UavConfig>,
    rate_scale: f64,
    state: UavEnvState,
    rng: RngStream,
}

impl UavEnv {
    /// Build the environment; user positions are drawn once from stream `"env"`.
    pub fn new(config: UavConfig, seed: u64) -> Result<Self> {
        Self::with_stream(config, RngStream::new(seed, "env"))
    }

    pub fn with_stream(config: UavConfig, mut rng: RngStream) -> Result<Self> {
        config.validate()?;
        let user_pos = (0..config.users)
            .map(|_| {
                [
                    rng.random_range(0.0..=config.arena[0]),
                    rng.random_range(0.0..=config.arena[1]),
                ]
            })
            .collect();
        let state = UavEnvState {
            uav_pos: vec![config.hangar; config.uavs],
            user_pos,
            t: config.horizon,
            horizon: config.horizon,
        };
        Ok(Self {
            rate_scale: config.rate_scale(),
            config: Arc::new(config),
            state,
            rng,
        })
    }

    pub fn config(&self) -> &UavConfig {
        &self.config
    }

    pub fn state(&self) -> &UavEnvState {
        &self.state
    }

    pub fn rate_scale(&self) -> f64 {
        self.rate_scale
    }

    /// Overwrite UAV positions (clamped into the arena).
    pub fn set_uav_positions(&mut self, positions: &[[f64; 2]]) -> Result<()> {
        if positions.len() != self.config.uavs {
            return Err(Error::Shape(format!(
                "expected {} UAV positions, got {}",
                self.config.uavs,
                positions.len()
            )));
        }
        self.state.uav_pos = positions.iter().map(|p| self.clamp(*p)).collect();
        Ok(())
    }

    pub fn set_user_positions(&mut self, positions: Vec<[f64; 2]>) {
        self.state.user_pos = positions;
    }

    pub fn reward(&self) -> f64 {
        uav_reward(&self.state, self.config.height, &self.config.link, self.rate_scale)
    }

    fn clamp(&self, p: [f64; 2]) -> [f64; 2] {
        [
            p[0].clamp(0.0, self.config.arena[0]),
            p[1].clamp(0.0, self.config.arena[1]),
        ]
    }
}

impl Environment for UavEnv {
    fn observation_dim(&self) -> usize {
        2 * self.config.uavs
    }

    fn action_count(&self) -> usize {
        self.config.action_count()
    }

    fn discrete_state_count(&self) -> Option<usize> {
        None
    }

    fn reset(&mut self) -> Result<StateVec> {
        self.state.uav_pos = vec![self.config.hangar; self.config.uavs];
        self.state.t = 0;
        self.state.horizon = self.config.horizon;
        Ok(self.observe())
    }

    /// UAV positions normalized by the arena size.
    fn observe(&self) -> StateVec {
        let [w, h] = self.config.arena;
        StateVec::new(
            self.state
                .uav_pos
                .iter()
                .flat_map(|p| [p[0] / w, p[1] / h])
                .collect(),
        )
    }

    fn full_state(&self) -> StateVec {
        let mut values: Vec<f64> = self.state.uav_pos.iter().flatten().copied().collect();
        values.extend(self.state.user_pos.iter().flatten());
        values.push(f64::from(self.state.t));
        StateVec::new(values)
    }

    fn step(&mut self, action: ActionId, _dynamics: &mut RngStream) -> Result<StepOutcome> {
        if self.state.t >= self.state.horizon {
            return Err(Error::EpisodeOver);
        }
        let count = self.action_count();
        if action.0 >= count {
            return Err(Error::InvalidAction {
                index: action.0,
                count,
            });
        }
        let stride = self.config.speed * self.config.dt;
        let moves = decode_joint_action(action.0, self.config.uavs);
        for (i, m) in moves.into_iter().enumerate() {
            let [dx, dy] = m.direction();
            let p = self.state.uav_pos[i];
            self.state.uav_pos[i] = self.clamp([p[0] + stride * dx, p[1] + stride * dy]);
        }
        self.state.t += 1;
        Ok(StepOutcome {
            next_state: self.observe(),
            reward: self.reward(),
            terminal: self.state.t == self.state.horizon,
        })
    }

    fn is_done(&self) -> bool {
        self.state.t >= self.state.horizon
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn dyn_rng() -> RngStream {
        RngStream::new(0, "env-dynamics")
    }

    /// Link budget arithmetic written out longhand, independent of `LinkBudget`.
    fn hand_rate(d: f64) -> f64 {
        let p = 0.1;
        let lambda = 0.125;
        let fspl = (lambda / (4.0 * std::f64::consts::PI * d)).powi(2);
        let received = p * fspl;
        let noise = 10f64.powf(-17.4) * 1e-3 * 1e6;
        1e6 * (1.0 + received / noise).ln() / std::f64::consts::LN_2
    }

    #[test]
    fn friis_at_five_meters() {
        let lb = LinkBudget::default();
        let rx = lb.received_power(5.0);
        assert!((rx - 3.958e-7).abs() / 3.958e-7 < 1e-3, "rx = {rx}");
        assert!((lb.noise_power() - 3.981e-15).abs() / 3.981e-15 < 1e-3);
        let rate = friis_rate(5.0, &lb).unwrap();
        assert!((rate - 26.6e6).abs() / 26.6e6 < 0.005, "rate = {rate}");
        assert!((rate - hand_rate(5.0)).abs() / rate < 1e-12);
    }

    #[test]
    fn inverse_square() {
        let lb = LinkBudget::default();
        for d in [5.0, 7.5, 40.0, 123.0] {
            let ratio = lb.received_power(d) / lb.received_power(2.0 * d);
            assert!((ratio - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rate_strictly_decreasing() {
        let lb = LinkBudget::default();
        let rates: Vec<f64> = (1..=40).map(|i| friis_rate(5.0 * i as f64, &lb).unwrap()).collect();
        assert!(rates.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn nonpositive_distance_rejected() {
        let lb = LinkBudget::default();
        assert_eq!(friis_rate(0.0, &lb).unwrap_err().code(), "INVALID_DISTANCE");
        assert!(friis_rate(-1.0, &lb).is_err());
    }

    #[test]
    fn uav_overhead_single_user() {
        let cfg = UavConfig {
            uavs: 1,
            users: 1,
            ..UavConfig::default()
        };
        let mut env = UavEnv::new(cfg, 3).unwrap();
        env.reset().unwrap();
        env.set_user_positions(vec![[40.0, 60.0]]);
        env.set_uav_positions(&[[40.0, 60.0]]).unwrap();
        let expected = friis_rate(5.0, &LinkBudget::default()).unwrap() / env.rate_scale();
        assert_eq!(env.reward(), expected);
        assert_eq!(env.reward(), 1.0);
    }

    #[test]
    fn duplicate_uav_changes_nothing() {
        let one = UavConfig {
            uavs: 1,
            ..UavConfig::default()
        };
        let two = UavConfig {
            uavs: 2,
            ..UavConfig::default()
        };
        let mut a = UavEnv::new(one, 5).unwrap();
        let mut b = UavEnv::new(two, 5).unwrap();
        a.set_uav_positions(&[[30.0, 30.0]]).unwrap();
        b.set_uav_positions(&[[30.0, 30.0], [30.0, 30.0]]).unwrap();
        assert_eq!(a.state().user_pos, b.state().user_pos);
        assert_eq!(a.reward(), b.reward());
    }

    #[test]
    fn hangar_reward_matches_pairwise_oracle() {
        let mut env = UavEnv::new(UavConfig::default(), 11).unwrap();
        env.reset().unwrap();
        let mut total = 0.0;
        for u in &env.state().user_pos {
            let mut best = f64::NEG_INFINITY;
            for p in &env.state().uav_pos {
                let d = ((p[0] - u[0]).powi(2) + (p[1] - u[1]).powi(2) + 25.0).sqrt();
                best = best.max(hand_rate(d));
            }
            total += best;
        }
        let oracle = total / 10.0 / hand_rate(5.0);
        assert!((env.reward() - oracle).abs() < 1e-12, "{} vs {oracle}", env.reward());
        assert!(env.reward() > 0.0 && env.reward() <= 1.0);
    }

    #[test]
    fn reset_places_all_uavs_at_hangar() {
        let mut env = UavEnv::new(UavConfig::default(), 1).unwrap();
        env.reset().unwrap();
        assert!(env.state().uav_pos.iter().all(|p| *p == [0.0, 0.0]));
        assert_eq!(env.state().t, 0);
    }

    #[test]
    fn user_layout_is_deterministic() {
        let a = UavEnv::new(UavConfig::default(), 42).unwrap();
        let b = UavEnv::new(UavConfig::default(), 42).unwrap();
        assert_eq!(a.state().user_pos, b.state().user_pos);
        let c = UavEnv::new(UavConfig::default(), 43).unwrap();
        assert_ne!(a.state().user_pos, c.state().user_pos);
    }

    #[test]
    fn user_centroid_is_arena_center() {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for seed in 0..1000 {
            let env = UavEnv::new(UavConfig::default(), seed).unwrap();
            for u in &env.state().user_pos {
                sx += u[0];
                sy += u[1];
                n += 1.0;
            }
        }
        assert!((sx / n - 50.0).abs() < 1.5, "cx = {}", sx / n);
        assert!((sy / n - 50.0).abs() < 1.5, "cy = {}", sy / n);
    }

    #[test]
    fn hover_is_identity() {
        let mut env = UavEnv::new(UavConfig::default(), 2).unwrap();
        env.reset().unwrap();
        env.set_uav_positions(&[[10.0, 20.0], [30.0, 40.0], [50.0, 60.0], [70.0, 80.0]])
            .unwrap();
        let before = env.state().uav_pos.clone();
        let r0 = env.reward();
        let out = env.step(ActionId(0), &mut dyn_rng()).unwrap();
        assert_eq!(env.state().uav_pos, before);
        assert_eq!(out.reward, r0);
    }

    #[test]
    fn boundary_moves_clamp() {
        let mut env = UavEnv::new(UavConfig::default(), 2).unwrap();
        env.reset().unwrap();
        // UAV 0 at the hangar corner tries -x, UAV 1 tries -y, UAV 2 +x, UAV 3 +y
        let moves = [UavMove::NegX, UavMove::NegY, UavMove::PosX, UavMove::PosY];
        env.step(ActionId(encode_joint_action(&moves)), &mut dyn_rng()).unwrap();
        assert_eq!(
            env.state().uav_pos,
            vec![[0.0, 0.0], [0.0, 0.0], [8.0, 0.0], [0.0, 8.0]]
        );
        env.set_uav_positions(&[[97.0, 50.0]; 4]).unwrap();
        let all_pos_x = encode_joint_action(&[UavMove::PosX; 4]);
        env.step(ActionId(all_pos_x), &mut dyn_rng()).unwrap();
        assert!(env.state().uav_pos.iter().all(|p| *p == [100.0, 50.0]));
    }

    #[test]
    fn joint_action_round_trip_exhaustive() {
        let mut seen = std::collections::HashSet::new();
        for index in 0..625 {
            let moves = decode_joint_action(index, 4);
            assert_eq!(moves.len(), 4);
            assert_eq!(encode_joint_action(&moves), index);
            assert!(seen.insert(moves));
        }
    }

    #[test]
    fn episode_has_exact_horizon() {
        let mut env = UavEnv::new(UavConfig::default(), 2).unwrap();
        env.reset().unwrap();
        let mut steps = 0;
        loop {
            let out = env.step(ActionId(steps % 625), &mut dyn_rng()).unwrap();
            steps += 1;
            if out.terminal {
                break;
            }
        }
        assert_eq!(steps, 100);
        assert_eq!(env.step(ActionId(0), &mut dyn_rng()).unwrap_err().code(), "EPISODE_OVER");
    }

    #[test]
    fn snapshot_fuzz_serialized_equality() {
        let mut env = UavEnv::new(UavConfig::default(), 9).unwrap();
        env.reset().unwrap();
        let mut picker = RngStream::new(9, "fuzz");
        for _ in 0..100 {
            if env.is_done() {
                env.reset().unwrap();
            }
            env.step(ActionId(picker.random_range(0..625)), &mut dyn_rng()).unwrap();
            let snap = env.snapshot();
            let before = serde_json::to_string(&env).unwrap();
            let mut other = env.clone();
            if !other.is_done() {
                other.step(ActionId(picker.random_range(0..625)), &mut dyn_rng()).unwrap();
            }
            other.restore(&snap);
            assert_eq!(serde_json::to_string(&other).unwrap(), before);
        }
    }

    proptest! {
        #[test]
        fn reward_permutation_invariant(
            uavs in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..6),
            users in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..12),
            rot_a in 0usize..6,
            rot_b in 0usize..12,
        ) {
            let lb = LinkBudget::default();
            let scale = friis_rate(5.0, &lb).unwrap();
            let mk = |v: &[(f64, f64)]| v.iter().map(|&(x, y)| [x, y]).collect::<Vec<_>>();
            let s = UavEnvState { uav_pos: mk(&uavs), user_pos: mk(&users), t: 0, horizon: 1 };
            let mut p = s.clone();
            p.uav_pos.rotate_left(rot_a % uavs.len());
            p.user_pos.rotate_left(rot_b % users.len());
            p.uav_pos.reverse();
            prop_assert_eq!(uav_reward(&s, 5.0, &lb, scale), uav_reward(&p, 5.0, &lb, scale));
        }

        #[test]
        fn extra_uav_never_decreases_reward(
            uavs in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..5),
            extra in (0.0f64..100.0, 0.0f64..100.0),
            users in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 1..12),
        ) {
            let lb = LinkBudget::default();
            let mk = |v: &[(f64, f64)]| v.iter().map(|&(x, y)| [x, y]).collect::<Vec<_>>();
            let s = UavEnvState { uav_pos: mk(&uavs), user_pos: mk(&users), t: 0, horizon: 1 };
            let mut bigger = s.clone();
            bigger.uav_pos.push([extra.0, extra.1]);
            prop_assert!(uav_reward(&bigger, 5.0, &lb, 1.0) >= uav_reward(&s, 5.0, &lb, 1.0));
        }
    }
}
