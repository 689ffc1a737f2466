//! Vehicle picks an access point for a delay-bounded upload.
//!
//! Shows the analytic outcome of every access point along the road, then
//! trains tabular Q-learning with one and with all actions tried per state.
//!
//! ```bash
//! cargo run --release --example urllc_access_selection
//! ```

use twinforge::agents::{EpsilonSchedule, QlConfig};
use twinforge::env::urllc::resolve_transmission;
use twinforge::env::{UrllcConfig, UrllcEnv};
use twinforge::trainer::{AgentConfig, StrategyConfig, Trainer, TrainerConfig};

fn main() -> twinforge::Result<()> {
    let cfg = UrllcConfig::default();
    println!("{:>6}  outcome per access point", "pos");
    for pos in (0..=1000).step_by(125) {
        let pos = pos as f64;
        let cells: Vec<String> = cfg
            .aps
            .iter()
            .map(|ap| {
                let r = resolve_transmission(pos, cfg.vehicle_speed, &cfg.task, ap);
                format!("{:?}({:.2}s)", r.outcome, r.latency)
            })
            .collect();
        println!("{pos:>6}  {}", cells.join("  "));
    }

    let episodes = 3000;
    for n in [1, 4] {
        let env = UrllcEnv::new(cfg.clone(), 11)?;
        let mut tc = TrainerConfig::new(
            AgentConfig::Ql(QlConfig::default()),
            EpsilonSchedule::new(1.0, 0.01, 50)?,
            StrategyConfig::multiaction(n),
        );
        tc.mirror = true;
        let mut trainer = Trainer::new(env, tc, 11)?;
        let rows = trainer.run(episodes, |_| {})?;
        let tail = &rows[rows.len() - 500..];
        let mean = tail.iter().map(|m| m.total_reward).sum::<f64>() / tail.len() as f64;
        let twin: u64 = rows.iter().map(|m| m.twin_transitions).sum();
        println!("n={n}: mean reward over last 500 episodes {mean:.2} ({twin} twin transitions)");
    }
    Ok(())
}
