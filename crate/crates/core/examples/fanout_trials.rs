//! Try every action from one physical state in divergent domains.
//!
//! ```bash
//! cargo run --example fanout_trials
//! ```

use twinforge::env::{Environment, UrllcConfig, UrllcEnv};
use twinforge::twin::{fanout_trials, DigitalDomain, NoiseModel};
use twinforge::ActionId;

fn main() -> twinforge::Result<()> {
    let mut env = UrllcEnv::new(UrllcConfig::default(), 4)?;
    env.reset()?;
    env.set_vehicle(520.0);
    let snap = env.snapshot();

    let mut domains = (0..2)
        .map(|i| DigitalDomain::divergent(i, env.clone(), 4, NoiseModel::zero(), 100))
        .collect::<twinforge::Result<Vec<_>>>()?;
    let actions: Vec<ActionId> = (0..env.action_count()).rev().map(ActionId).collect();
    let trials = fanout_trials(&snap, &actions, &mut domains)?;
    for t in &trials {
        println!("action {} in domain {}: reward {:8.3}", t.action.index(), t.domain.id, t.reward);
    }
    for d in &domains {
        println!("domain {} buffered {} transition(s)", d.id.id, d.buffer.len());
    }
    // the physical environment never moved
    assert_eq!(env.snapshot(), snap);

    let dup = fanout_trials(&snap, &[ActionId(1), ActionId(1)], &mut domains);
    println!("duplicate actions: {}", dup.unwrap_err().code());
    Ok(())
}
