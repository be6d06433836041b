use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use smoothinglab::config::ExperimentConfig;
use smoothinglab::report::write_all;
use smoothinglab::{exit, run, LabError, Op};

/// Smoothing-transform experiments: branching random walks, ladder
/// functions, fixed points and their boundary measures.
#[derive(Debug, Parser)]
#[command(name = "smoothinglab", version)]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "SMOOTHINGLAB_WORKERS", default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    op: Op,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cli: &Cli) -> Result<i32, LabError> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .map_err(|e| LabError::Config(e.to_string()))?;
    }
    let path = cli.config.as_ref().ok_or_else(|| LabError::Config("--config is required".into()))?;
    let (mut cfg, hash): (ExperimentConfig, String) = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let (report, prov) = run(cli.op, &cfg, &hash)?;
    let paths = write_all(&cli.out, &report, &prov)?;
    for n in &report.notes {
        eprintln!("{n}");
    }
    for p in &paths {
        eprintln!("wrote {}", p.display());
    }
    Ok(match report.passed {
        Some(false) => exit::CHECK_FAILED,
        _ => exit::SUCCESS,
    })
}
