//! Multi-step TD targets from policy rollouts in the digital domains.
//!
//! ```bash
//! cargo run --example predictive_targets
//! ```

use twinforge::agents::MlpParams;
use twinforge::env::{Environment, UavConfig, UavEnv};
use twinforge::twin::{predict_target, DigitalDomain, FirstStep, Lookahead, NoiseModel};
use twinforge::{ActionId, RngStream};

fn main() -> twinforge::Result<()> {
    let cfg = UavConfig {
        uavs: 1,
        users: 4,
        horizon: 20,
        ..UavConfig::default()
    };
    let mut env = UavEnv::new(cfg, 2)?;
    let mut dynamics = RngStream::new(2, "env-dynamics");
    env.reset()?;
    let action = ActionId(1);
    let out = env.step(action, &mut dynamics)?;
    let first = FirstStep {
        action,
        reward: out.reward,
        terminal: out.terminal,
        next: env.snapshot(),
    };

    // linear heads with zero weights: constant Q values set through the biases
    let sizes = [env.observation_dim(), env.action_count()];
    let mut policy = MlpParams::zeros(&sizes)?;
    policy.layer_mut(0).1[0] = 1.0;
    let mut bootstrap = MlpParams::zeros(&sizes)?;
    bootstrap.layer_mut(0).1.fill(0.5);

    let mut domains = (0..4)
        .map(|i| DigitalDomain::divergent(i, env.clone(), 2, NoiseModel::zero(), 100))
        .collect::<twinforge::Result<Vec<_>>>()?;
    let mut rollout = RngStream::new(2, "rollout");
    println!("first reward {:.4}", first.reward);
    for depth in [1, 2, 3, 5, 10] {
        let la = Lookahead {
            depth,
            trajectories: 4,
            gamma: 0.9,
            epsilon: 0.1,
        };
        let y = predict_target(&first, &policy, &bootstrap, la, &mut domains, &mut rollout)?;
        println!("k={depth:>2}: target {y:.4}");
    }
    Ok(())
}
