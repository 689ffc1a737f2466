//! Vehicular URLLC access-point selection.
//!
//! A vehicle drives in `+x` at constant speed and must hand one deadline-bound
//! task to an access point. The whole transmission is resolved analytically
//! from the single choice, so an episode is exactly one decision.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, StepOutcome};
use crate::error::{Error, Result};
use crate::model::{encode_discrete, ActionId, StateVec};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    /// Meters along the road.
    pub position: f64,
    /// Coverage half-width in meters.
    pub radius: f64,
    /// Bits per second.
    pub rate: f64,
    /// Reward units per second of transmission.
    pub cost_per_second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrllcTask {
    /// Bits.
    pub size: f64,
    /// Seconds.
    pub deadline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrllcConfig {
    pub road_length: f64,
    pub vehicle_speed: f64,
    pub aps: Vec<AccessPoint>,
    pub task: UrllcTask,
    pub w_success: f64,
    pub w_lat: f64,
    pub w_cost: f64,
    /// Tabular resolution of the vehicle position.
    pub bins: usize,
}

impl Default for UrllcConfig {
    fn default() -> Self {
        let ap = |position, radius, rate_mbps: f64, cost| AccessPoint {
            position,
            radius,
            rate: rate_mbps * 1e6,
            cost_per_second: cost,
        };
        Self {
            road_length: 2000.0,
            vehicle_speed: 20.0,
            aps: vec![
                ap(400.0, 250.0, 10.0, 1.0),
                ap(900.0, 150.0, 50.0, 4.0),
                ap(1300.0, 300.0, 20.0, 2.0),
                ap(1800.0, 200.0, 40.0, 3.0),
            ],
            task: UrllcTask {
                size: 20e6,
                deadline: 6.0,
            },
            w_success: 100.0,
            w_lat: 5.0,
            w_cost: 1.0,
            bins: 100,
        }
    }
}

impl UrllcConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.road_length > 0.0) {
            return bad(format!("road length must be > 0, got {}", self.road_length));
        }
        if !(self.vehicle_speed > 0.0) {
            return bad(format!("vehicle speed must be > 0, got {}", self.vehicle_speed));
        }
        if self.aps.is_empty() {
            return bad("at least one access point is required".into());
        }
        for (i, ap) in self.aps.iter().enumerate() {
            if !(ap.radius > 0.0 && ap.rate > 0.0 && ap.cost_per_second >= 0.0) {
                return bad(format!(
                    "access point {i} needs radius > 0, rate > 0, cost >= 0"
                ));
            }
            if !(0.0..=self.road_length).contains(&ap.position) {
                return bad(format!("access point {i} lies off the road"));
            }
        }
        if !(self.task.size > 0.0 && self.task.deadline > 0.0) {
            return bad("task size and deadline must be > 0".into());
        }
        if self.bins == 0 {
            return bad("bins must be >= 1".into());
        }
        let weights = [self.w_success, self.w_lat, self.w_cost];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("reward weights must be finite and >= 0".into());
        }
        Ok(())
    }

    /// Lower bound on any reward this instance can emit.
    pub fn reward_floor(&self) -> f64 {
        let max_tx = self
            .aps
            .iter()
            .map(|ap| self.task.size / ap.rate)
            .fold(0.0, f64::max);
        let max_cost = self
            .aps
            .iter()
            .map(|ap| ap.cost_per_second * self.task.size / ap.rate)
            .fold(0.0, f64::max);
        -self.w_lat * (self.road_length / self.vehicle_speed + max_tx) - self.w_cost * max_cost
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UrllcPhase {
    Choosing,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrllcEnvState {
    pub vehicle_pos: f64,
    pub vehicle_speed: f64,
    pub elapsed: f64,
    pub task: UrllcTask,
    pub phase: UrllcPhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransmissionOutcome {
    Success,
    FailNoCoverage,
    FailLeftCoverage,
    FailDeadline,
}

/// Timing and cost breakdown of one resolved transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionReport {
    pub outcome: TransmissionOutcome,
    pub wait_time: f64,
    /// Seconds spent transmitting (truncated at the coverage edge on failure).
    pub tx_time: f64,
    pub latency: f64,
    pub cost: f64,
}

/// Resolve a transmission from `pos` to `ap` analytically.
pub fn resolve_transmission(pos: f64, speed: f64, task: &UrllcTask, ap: &AccessPoint) -> TransmissionReport {
    let entry = ap.position - ap.radius;
    let exit = ap.position + ap.radius;
    let fail_no_coverage = TransmissionReport {
        outcome: TransmissionOutcome::FailNoCoverage,
        wait_time: 0.0,
        tx_time: 0.0,
        latency: 0.0,
        cost: 0.0,
    };
    let wait_time = if (pos - ap.position).abs() <= ap.radius {
        0.0
    } else if pos < entry {
        (entry - pos) / speed
    } else {
        return fail_no_coverage;
    };
    let tx_time = task.size / ap.rate;
    let start = pos + speed * wait_time;
    let residence = (exit - start) / speed;
    if tx_time > residence {
        return TransmissionReport {
            outcome: TransmissionOutcome::FailLeftCoverage,
            wait_time,
            tx_time: residence,
            latency: wait_time + residence,
            cost: ap.cost_per_second * residence,
        };
    }
    let latency = wait_time + tx_time;
    let outcome = if latency > task.deadline {
        TransmissionOutcome::FailDeadline
    } else {
        TransmissionOutcome::Success
    };
    TransmissionReport {
        outcome,
        wait_time,
        tx_time,
        latency,
        cost: ap.cost_per_second * tx_time,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrllcEnv {
    config: Arc<UrllcConfig>,
    state: UrllcEnvState,
    rng: RngStream,
    last_report: Option<TransmissionReport>,
}

impl UrllcEnv {
    /// Build an environment whose resets draw from stream `"env"` of `seed`.
    pub fn new(config: UrllcConfig, seed: u64) -> Result<Self> {
        Self::with_stream(config, RngStream::new(seed, "env"))
    }

    pub fn with_stream(config: UrllcConfig, rng: RngStream) -> Result<Self> {
        config.validate()?;
        let state = UrllcEnvState {
            vehicle_pos: 0.0,
            vehicle_speed: config.vehicle_speed,
            elapsed: 0.0,
            task: config.task.clone(),
            phase: UrllcPhase::Done,
        };
        Ok(Self {
            config: Arc::new(config),
            state,
            rng,
            last_report: None,
        })
    }

    pub fn config(&self) -> &UrllcConfig {
        &self.config
    }

    pub fn state(&self) -> &UrllcEnvState {
        &self.state
    }

    /// Place the vehicle explicitly and start a new decision.
    pub fn set_vehicle(&mut self, pos: f64) {
        self.state.vehicle_pos = pos;
        self.state.elapsed = 0.0;
        self.state.phase = UrllcPhase::Choosing;
        self.last_report = None;
    }

    pub fn last_report(&self) -> Option<&TransmissionReport> {
        self.last_report.as_ref()
    }

    pub fn reward_for(&self, report: &TransmissionReport) -> f64 {
        let success = if report.outcome == TransmissionOutcome::Success {
            1.0
        } else {
            0.0
        };
        self.config.w_success * success
            - self.config.w_lat * report.latency
            - self.config.w_cost * report.cost
    }

    /// Step and also return the transmission breakdown.
    pub fn step_detailed(&mut self, action: ActionId) -> Result<(StepOutcome, TransmissionReport)> {
        if self.state.phase == UrllcPhase::Done {
            return Err(Error::EpisodeOver);
        }
        let ap = self.config.aps.get(action.0).ok_or(Error::InvalidAction {
            index: action.0,
            count: self.config.aps.len(),
        })?;
        let report = resolve_transmission(
            self.state.vehicle_pos,
            self.state.vehicle_speed,
            &self.state.task,
            ap,
        );
        let reward = self.reward_for(&report);
        self.state.elapsed = report.latency;
        self.state.vehicle_pos += self.state.vehicle_speed * report.latency;
        self.state.phase = UrllcPhase::Done;
        self.last_report = Some(report);
        let outcome = StepOutcome {
            next_state: self.observe(),
            reward,
            terminal: true,
        };
        Ok((outcome, report))
    }
}

impl Environment for UrllcEnv {
    fn observation_dim(&self) -> usize {
        1
    }

    fn action_count(&self) -> usize {
        self.config.aps.len()
    }

    fn discrete_state_count(&self) -> Option<usize> {
        Some(self.config.bins)
    }

    fn reset(&mut self) -> Result<StateVec> {
        let pos = self.rng.random_range(0.0..=self.config.road_length * 0.5);
        self.set_vehicle(pos);
        Ok(self.observe())
    }

    fn observe(&self) -> StateVec {
        let pos = self.state.vehicle_pos;
        let probe = StateVec::new(vec![pos]);
        let id = encode_discrete(&probe, self.config.bins, 0.0, self.config.road_length)
            .expect("vehicle position is finite");
        StateVec::with_discrete(probe.values, id)
    }

    fn full_state(&self) -> StateVec {
        let mut values = vec![self.state.vehicle_pos, self.state.vehicle_speed, self.state.elapsed];
        for ap in &self.config.aps {
            values.extend([ap.position, ap.radius, ap.rate, ap.cost_per_second]);
        }
        values.extend([self.state.task.size, self.state.task.deadline]);
        StateVec::new(values)
    }

    fn step(&mut self, action: ActionId, _dynamics: &mut RngStream) -> Result<StepOutcome> {
        self.step_detailed(action).map(|(outcome, _)| outcome)
    }

    fn is_done(&self) -> bool {
        self.state.phase == UrllcPhase::Done
    }
}
