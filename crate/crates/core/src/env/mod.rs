//! Simulated environments and the snapshot contract every digital domain relies on.

pub mod uav;
pub mod urllc;

use crate::error::Result;
use crate::model::{ActionId, StateVec};
use crate::rng::RngStream;

pub use uav::{dbm_per_hz_to_watts, friis_rate, LinkBudget, UavConfig, UavEnv, UavEnvState, UavMove};
pub use urllc::{AccessPoint, TransmissionOutcome, UrllcConfig, UrllcEnv, UrllcEnvState, UrllcTask};

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: StateVec,
    pub reward: f64,
    pub terminal: bool,
}

/// A complete, restorable copy of an environment, including the position of
/// every random stream the environment owns.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSnapshot<E>(E);

impl<E> EnvSnapshot<E> {
    pub fn env(&self) -> &E {
        &self.0
    }
}

/// An episodic environment that can be copied into digital domains.
///
/// Randomness used by the transition dynamics is supplied by the caller, so a
/// digital domain restored from a snapshot can draw its own futures without
/// touching the physical stream.
pub trait Environment: Clone + Send + Sync + 'static {
    fn observation_dim(&self) -> usize;
    fn action_count(&self) -> usize;
    /// Number of tabular states, when the environment exposes a discrete encoding.
    fn discrete_state_count(&self) -> Option<usize>;

    fn reset(&mut self) -> Result<StateVec>;
    /// The agent's (possibly partial) observation of the current state.
    fn observe(&self) -> StateVec;
    /// Every state variable, as available to the identical digital domain.
    fn full_state(&self) -> StateVec {
        self.observe()
    }
    fn step(&mut self, action: ActionId, dynamics: &mut RngStream) -> Result<StepOutcome>;
    fn is_done(&self) -> bool;

    fn snapshot(&self) -> EnvSnapshot<Self> {
        EnvSnapshot(self.clone())
    }

    fn restore(&mut self, snapshot: &EnvSnapshot<Self>) {
        self.clone_from(&snapshot.0);
    }
}
