use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::{EnvConfig, ExperimentConfig};
use super::metrics::{mean_std, MetricsTable};
use crate::env::{Environment, UavEnv, UrllcEnv};
use crate::error::{Error, Result};
use crate::fmt::sig6;
use crate::trainer::Trainer;

pub const SUMMARY_HEADER: &str = "episode,mean_smoothed_reward,std_smoothed_reward";

/// Environment variable capping how many seeds train at once.
pub const THREADS_VAR: &str = "TWINFORGE_THREADS";

#[derive(Debug)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: Error,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub tables: Vec<MetricsTable>,
    pub failures: Vec<SeedFailure>,
}

fn train<E: Environment>(env: E, cfg: &ExperimentConfig, seed: u64, dir: Option<&Path>) -> Result<MetricsTable> {
    let mut trainer = Trainer::new(env, cfg.trainer_config()?, seed)?;
    let rows = trainer.run(cfg.episodes, |_| {})?;
    if let Some(dir) = dir.filter(|_| cfg.checkpoint) {
        trainer.agent().params().save(dir.join(format!("params_seed{seed}.bin")))?;
    }
    MetricsTable::new(seed, rows, cfg.window)
}

/// Train one seed in memory. With `checkpoint_dir`, final parameters are saved there.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64, checkpoint_dir: Option<&Path>) -> Result<MetricsTable> {
    match &cfg.env {
        EnvConfig::Urllc(c) => train(UrllcEnv::new(c.clone(), seed)?, cfg, seed, checkpoint_dir),
        EnvConfig::Uav(c) => train(UavEnv::new(c.clone(), seed)?, cfg, seed, checkpoint_dir),
    }
}

/// Worker count: `TWINFORGE_THREADS` when set, else the machine's parallelism.
pub fn thread_budget() -> usize {
    std::env::var(THREADS_VAR)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Train every seed, in parallel up to `threads`, preserving seed order.
pub fn run_seeds(cfg: &ExperimentConfig, threads: usize, checkpoint_dir: Option<&Path>) -> Vec<Result<MetricsTable>> {
    let seeds = &cfg.seeds;
    let threads = threads.clamp(1, seeds.len().max(1));
    let slots: Vec<Mutex<Option<Result<MetricsTable>>>> = seeds.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let out = run_seed(cfg, seeds[i], checkpoint_dir);
                *slots[i].lock().expect("slot lock") = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every seed ran"))
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_values(table: &MetricsTable) -> Vec<f64> {
    // summaries use exactly the values written to the per-seed files
    table
        .smoothed
        .iter()
        .map(|v| sig6(*v).parse().expect("sig6 output parses"))
        .collect()
}

/// Write per-seed metrics, `summary.csv` and the canonical `config.txt`.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, tables: &[MetricsTable], failures: &[SeedFailure]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for t in tables {
        let path = dir.join(format!("metrics_seed{}.csv", t.seed));
        let mut w = create(&path)?;
        t.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join("summary.csv");
    let mut w = create(&path)?;
    let curves: Vec<Vec<f64>> = tables.iter().map(csv_values).collect();
    let refs: Vec<&[f64]> = curves.iter().map(Vec::as_slice).collect();
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "{SUMMARY_HEADER}")?;
        if !refs.is_empty() {
            for (i, (m, s)) in mean_std(&refs).into_iter().enumerate() {
                writeln!(w, "{i},{},{}", sig6(m), sig6(s))?;
            }
        }
        for f in failures {
            writeln!(w, "# seed {} failed: {}: {}", f.seed, f.error.code(), f.error)?;
        }
        w.flush()
    };
    write(&mut w).map_err(|e| Error::io(&path, e))?;
    let path = dir.join("config.txt");
    fs::write(&path, cfg.to_text()).map_err(|e| Error::io(&path, e))
}

/// Run the whole grid of seeds and write all files into `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with_threads(cfg, thread_budget())
}

pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentReport> {
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut tables = Vec::new();
    let mut failures = Vec::new();
    for (seed, out) in cfg.seeds.iter().zip(run_seeds(cfg, threads, Some(&dir))) {
        match out {
            Ok(t) => tables.push(t),
            Err(error) if error.is_config_error() => return Err(error),
            Err(error) => failures.push(SeedFailure { seed: *seed, error }),
        }
    }
    write_outputs(&dir, cfg, &tables, &failures)?;
    Ok(ExperimentReport {
        output_dir: dir,
        tables,
        failures,
    })
}
