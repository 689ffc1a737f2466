//! The identical domain replays every physical step and must agree bit for bit.
//!
//! ```bash
//! cargo run --example mirror_domain
//! ```

use twinforge::env::{Environment, UrllcConfig, UrllcEnv};
use twinforge::twin::{NoiseModel, TwinSpace};
use twinforge::{ActionId, RngStream, Transition};

fn main() -> twinforge::Result<()> {
    let mut env = UrllcEnv::new(UrllcConfig::default(), 1)?;
    let mut dynamics = RngStream::new(1, "env-dynamics");
    let mut space = TwinSpace::new(&env, &dynamics, 1, 0, NoiseModel::zero(), 1000, true)?;

    let mut s = env.reset()?;
    space.begin_episode()?;
    while !env.is_done() {
        let a = ActionId(2);
        let out = env.step(a, &mut dynamics)?;
        let t = Transition::physical(s, a, out.reward, out.next_state.clone(), out.terminal)?;
        space.mirror_step(&t)?;
        println!("physical reward {:.3}, mirror agrees", t.reward);
        s = out.next_state;
    }
    let mirror = space.mirror.as_ref().expect("mirror enabled");
    println!("mirror buffer holds {} record(s)", mirror.buffer.len());
    println!("global state: {:?}", space.global_observation().map(|g| g.values));

    // a drifted mirror is caught on the next step
    let s = env.reset()?;
    space.begin_episode()?;
    space.mirror.as_mut().expect("mirror enabled").env.set_vehicle(999.0);
    let out = env.step(ActionId(0), &mut dynamics)?;
    let t = Transition::physical(s, ActionId(0), out.reward, out.next_state, out.terminal)?;
    match space.mirror_step(&t) {
        Err(e) => println!("perturbed mirror: {}: {e}", e.code()),
        Ok(()) => println!("perturbation happened to be invisible"),
    }
    Ok(())
}
