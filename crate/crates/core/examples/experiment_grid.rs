//! A small config-driven grid: two strategies, three seeds each, then a
//! ranking by area under the smoothed curve.
//!
//! ```bash
//! cargo run --release --example experiment_grid
//! ```

use twinforge::harness::{compare_curves, run_experiment, Criterion, Curve, ExperimentConfig};

const BASE: &str = "
env=urllc
agent=ql
episodes=400
seeds=1,2,3
epsilon.end=0.01
epsilon.decay_episodes=50
strategy.kind=multiaction
";

fn main() -> twinforge::Result<()> {
    let root = std::env::temp_dir().join("twinforge-grid");
    let mut curves = Vec::new();
    for n in [1, 4] {
        let dir = root.join(format!("n{n}"));
        let overrides = [format!("strategy.n={n}"), format!("output_dir={}", dir.display())];
        let cfg = ExperimentConfig::parse_with_overrides(BASE, &overrides)?;
        let report = run_experiment(&cfg)?;
        println!("n={n}: {} seed(s) written to {}", report.tables.len(), dir.display());
        let mut curve = Curve::load(dir.join("summary.csv"))?;
        curve.name = format!("n={n}");
        curves.push(curve);
    }
    print!("{}", compare_curves(&curves, Criterion::Auc)?);
    print!("{}", compare_curves(&curves, Criterion::EpisodesToFraction(0.95))?);
    Ok(())
}
