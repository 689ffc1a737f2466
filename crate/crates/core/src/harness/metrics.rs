use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt::sig6;
use crate::trainer::EpisodeMetrics;

pub const METRICS_HEADER: &str =
    "episode,total_reward,smoothed_reward,epsilon,loss_mean,phys_transitions,twin_transitions";

/// Trailing-window mean; the first `window - 1` points average what exists so far.
pub fn moving_average(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Config("moving-average window must be >= 1".into()));
    }
    let out = (0..series.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            series[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect();
    Ok(out)
}

/// One seed's learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub seed: u64,
    pub rows: Vec<EpisodeMetrics>,
    pub smoothed: Vec<f64>,
}

impl MetricsTable {
    pub fn new(seed: u64, rows: Vec<EpisodeMetrics>, window: usize) -> Result<Self> {
        let rewards: Vec<f64> = rows.iter().map(|r| r.total_reward).collect();
        let smoothed = moving_average(&rewards, window)?;
        Ok(Self { seed, rows, smoothed })
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{METRICS_HEADER}")?;
        for (r, s) in self.rows.iter().zip(&self.smoothed) {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.episode,
                sig6(r.total_reward),
                sig6(*s),
                sig6(r.epsilon),
                sig6(r.loss_mean),
                r.phys_transitions,
                r.twin_transitions
            )?;
        }
        Ok(())
    }
}

/// Per-episode mean and sample standard deviation across curves.
pub fn mean_std(curves: &[&[f64]]) -> Vec<(f64, f64)> {
    let len = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    let n = curves.len() as f64;
    (0..len)
        .map(|i| {
            let mean = curves.iter().map(|c| c[i]).sum::<f64>() / n;
            let std = if curves.len() > 1 {
                (curves.iter().map(|c| (c[i] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            (mean, std)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn window_one_is_identity() {
        let s = [3.0, -1.0, 2.5];
        assert_eq!(moving_average(&s, 1).unwrap(), s.to_vec());
    }

    #[test]
    fn warmup_is_running_mean() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(moving_average(&s, 10).unwrap(), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
    }

    #[test]
    fn constant_stays_constant() {
        let s = vec![4.25; 50];
        assert_eq!(moving_average(&s, 10).unwrap(), s);
    }

    #[test]
    fn zero_window_rejected() {
        assert_eq!(moving_average(&[1.0], 0).unwrap_err().code(), "CONFIG_ERROR");
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            EpisodeMetrics {
                episode: 0,
                total_reward: 94.0,
                epsilon: 1.0,
                loss_mean: 0.0,
                phys_transitions: 1,
                twin_transitions: 4,
            },
            EpisodeMetrics {
                episode: 1,
                total_reward: 1.0 / 3.0,
                epsilon: 0.9,
                loss_mean: 1234567.0,
                phys_transitions: 1,
                twin_transitions: 4,
            },
        ];
        let t = MetricsTable::new(7, rows, 10).unwrap();
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            format!("{METRICS_HEADER}\n0,94,94,1,0,1,4\n1,0.333333,47.1667,0.9,1.23457e+06,1,4\n")
        );
    }

    #[test]
    fn mean_std_small() {
        let a = [1.0, 2.0];
        let b = [3.0, 2.0];
        let ms = mean_std(&[&a, &b]);
        assert_eq!(ms[0].0, 2.0);
        assert!((ms[0].1 - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(ms[1], (2.0, 0.0));
    }

    proptest! {
        #[test]
        fn interior_shift_equivariant(
            s in prop::collection::vec(-100.0f64..100.0, 12..40),
            c in -50.0f64..50.0,
            w in 1usize..10,
        ) {
            let base = moving_average(&s, w).unwrap();
            let shifted: Vec<f64> = s.iter().map(|x| x + c).collect();
            let moved = moving_average(&shifted, w).unwrap();
            for i in 0..s.len() {
                prop_assert!((moved[i] - base[i] - c).abs() < 1e-9);
            }
        }

        #[test]
        fn warmup_prefix_is_running_mean(s in prop::collection::vec(-1e3f64..1e3, 1..60), w in 1usize..30) {
            let got = moving_average(&s, w).unwrap();
            let mut running = 0.0;
            for i in 0..s.len().min(w) {
                running += (s[i] - running) / (i + 1) as f64;
                prop_assert!((got[i] - running).abs() < 1e-9);
            }
        }
    }
}
