//! UAVs repositioning over ground users, trained with a small DQN and
//! lookahead targets from the digital domains.
//!
//! ```bash
//! cargo run --release --example uav_coverage
//! ```

use twinforge::agents::{DqnConfig, EpsilonSchedule};
use twinforge::env::uav::decode_joint_action;
use twinforge::env::{Environment, UavConfig, UavEnv};
use twinforge::trainer::{AgentConfig, StrategyConfig, Trainer, TrainerConfig};
use twinforge::{ActionId, RngStream};

fn main() -> twinforge::Result<()> {
    let cfg = UavConfig {
        uavs: 2,
        users: 6,
        horizon: 50,
        ..UavConfig::default()
    };
    let mut env = UavEnv::new(cfg.clone(), 3)?;
    let mut dynamics = RngStream::new(3, "env-dynamics");
    env.reset()?;
    println!("{} joint actions, observation dim {}", env.action_count(), env.observation_dim());
    println!("initial reward {:.4}", env.reward());
    for a in [0, 7, 12] {
        let out = env.step(ActionId(a), &mut dynamics)?;
        println!("moves {:?} -> reward {:.4}", decode_joint_action(a, cfg.uavs), out.reward);
    }

    let dqn = DqnConfig {
        hidden: vec![32, 32],
        batch_size: 32,
        target_sync: 200,
        ..DqnConfig::default()
    };
    for k in [1, 3] {
        let env = UavEnv::new(cfg.clone(), 5)?;
        let tc = TrainerConfig::new(
            AgentConfig::Dqn(dqn.clone()),
            EpsilonSchedule::new(1.0, 0.05, 30)?,
            StrategyConfig::prediction(k, 2),
        );
        let mut trainer = Trainer::new(env, tc, 5)?;
        let rows = trainer.run(40, |m| {
            if m.episode % 10 == 9 {
                println!("k={k} episode {:>3}: reward {:.2}, loss {:.4}", m.episode, m.total_reward, m.loss_mean);
            }
        })?;
        let last = &rows[rows.len() - 10..];
        println!("k={k}: last-10 mean {:.2}", last.iter().map(|m| m.total_reward).sum::<f64>() / 10.0);
    }
    Ok(())
}
