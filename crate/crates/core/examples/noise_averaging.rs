//! Imperfect twins: Gaussian noise on trial outcomes, and how averaging
//! replicas pulls the estimate back toward the true reward.
//!
//! ```bash
//! cargo run --example noise_averaging
//! ```

use twinforge::env::{Environment, UrllcConfig, UrllcEnv};
use twinforge::twin::{fanout_averaged, DigitalDomain, NoiseModel};
use twinforge::{ActionId, RngStream};

fn main() -> twinforge::Result<()> {
    let mut env = UrllcEnv::new(UrllcConfig::default(), 9)?;
    env.reset()?;
    env.set_vehicle(700.0);
    let snap = env.snapshot();
    let action = ActionId(1);
    let truth = {
        let mut e = env.clone();
        e.step(action, &mut RngStream::new(0, "unused"))?.reward
    };
    println!("true reward {truth:.3}");

    let noise = NoiseModel::gaussian(0.0, 5.0);
    for replicas in [1, 4, 16, 64] {
        let mut domains = (0..replicas)
            .map(|i| DigitalDomain::divergent(i, env.clone(), 9, noise.clone(), 10_000))
            .collect::<twinforge::Result<Vec<_>>>()?;
        let errs: Vec<f64> = (0..200)
            .map(|_| fanout_averaged(&snap, &[action], &mut domains, replicas).map(|t| t[0].reward - truth))
            .collect::<twinforge::Result<_>>()?;
        let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
        println!(
            "replicas {replicas:>3}: rmse {rmse:.3} (expected {:.3})",
            5.0 / (replicas as f64).sqrt()
        );
    }
    Ok(())
}
