use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twinforge::harness::config::key_help;
use twinforge::harness::{compare_curves, run_experiment, Criterion, Curve, ExperimentConfig};
use twinforge::Error;

#[derive(Parser)]
#[command(name = "twinforge", version, about = "Digital-twin-assisted RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of an experiment and write CSV learning curves.
    #[command(after_help = format!("Config keys (key, default, meaning):\n{}", key_help()))]
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Comma-separated seeds, replacing `seeds=` from the file.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Extra `key=value` lines applied after the file.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Rank learning curves by `auc` or `episodes_to_fraction(F)`.
    Compare {
        criterion: String,
        #[arg(required = true)]
        csv: Vec<PathBuf>,
    },
}

fn exit_for(e: &Error) -> ExitCode {
    eprintln!("error[{}]: {e}", e.code());
    if e.is_config_error() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn run(config: PathBuf, output_dir: Option<PathBuf>, seeds: Vec<u64>, mut overrides: Vec<String>) -> Result<bool, Error> {
    let text = std::fs::read_to_string(&config).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
    if !seeds.is_empty() {
        let list: Vec<String> = seeds.iter().map(u64::to_string).collect();
        overrides.push(format!("seeds={}", list.join(",")));
    }
    let mut cfg = ExperimentConfig::parse_with_overrides(&text, &overrides)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    let report = run_experiment(&cfg)?;
    for f in &report.failures {
        eprintln!("seed {} failed: {}: {}", f.seed, f.error.code(), f.error);
    }
    println!(
        "wrote {} metrics file(s) and summary.csv to {}",
        report.tables.len(),
        report.output_dir.display()
    );
    Ok(report.failures.is_empty())
}

fn compare(criterion: &str, files: &[PathBuf]) -> Result<(), Error> {
    let criterion = Criterion::parse(criterion)?;
    let curves = files.iter().map(Curve::load).collect::<Result<Vec<_>, _>>()?;
    print!("{}", compare_curves(&curves, criterion)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Run {
            config,
            output_dir,
            seeds,
            overrides,
        } => match run(config, output_dir, seeds, overrides) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => exit_for(&e),
        },
        Command::Compare { criterion, csv } => match compare(&criterion, &csv) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => exit_for(&e),
        },
    }
}
