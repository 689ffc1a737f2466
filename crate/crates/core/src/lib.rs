//! Reinforcement learning with a digital twin of the environment.
//!
//! The physical environment is mirrored by an identical domain and cloned into
//! divergent domains that try alternative actions or roll the current policy
//! forward to build multi-step targets. See `examples/` for runnable tours.

pub mod agents;
pub mod env;
pub mod error;
pub mod fmt;
pub mod harness;
pub mod model;
pub mod rng;
pub mod trainer;
pub mod twin;

pub use error::{Error, Result};
pub use model::{ActionId, DomainId, DomainRole, StateVec, Transition, TransitionKind};
pub use rng::RngStream;
