//! Everything in summary.csv can be recomputed from the per-seed files.

use std::path::Path;

use twinforge::harness::experiment::run_experiment_with_threads;
use twinforge::harness::ExperimentConfig;

fn table(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-5 * a.abs().max(b.abs()).max(1e-3)
}

#[test]
fn summary_and_smoothing_recompute_from_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "env=urllc\nagent=ql\nepisodes=60\nseeds=1,2,3,4\nmetrics.window=7\nstrategy.kind=multiaction\nstrategy.n=2\noutput_dir={}\n",
        tmp.path().display()
    );
    let cfg = ExperimentConfig::parse(&text).unwrap();
    run_experiment_with_threads(&cfg, 2).unwrap();

    let seeds: Vec<Vec<Vec<f64>>> = cfg
        .seeds
        .iter()
        .map(|s| table(&tmp.path().join(format!("metrics_seed{s}.csv"))))
        .collect();
    for rows in &seeds {
        assert_eq!(rows.len(), 60);
        for i in 0..rows.len() {
            let lo = (i + 1).saturating_sub(7);
            let window: Vec<f64> = rows[lo..=i].iter().map(|r| r[1]).collect();
            let mean = window.iter().sum::<f64>() / window.len() as f64;
            // inputs carry six significant digits, so error scales with the largest one
            let scale = window.iter().fold(mean.abs(), |m, v| m.max(v.abs()));
            assert!((rows[i][2] - mean).abs() <= 1e-5 * scale, "episode {i}: {} vs {mean}", rows[i][2]);
        }
    }

    let summary = table(&tmp.path().join("summary.csv"));
    assert_eq!(summary.len(), 60);
    for (i, row) in summary.iter().enumerate() {
        let vals: Vec<f64> = seeds.iter().map(|rows| rows[i][2]).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert_eq!(row[0] as usize, i);
        assert!(close(row[1], mean), "episode {i}: mean {} vs {mean}", row[1]);
        assert!(close(row[2], std) || (row[2] - std).abs() < 1e-9, "episode {i}: std {} vs {std}", row[2]);
    }
}
