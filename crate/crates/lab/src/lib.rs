//! Experiment driver around `smoothinglab-core`: JSON configs, CSV reports
//! with provenance lines, and the acceptance bundles behind `verify`.

pub mod commands;
pub mod config;
pub mod model;
pub mod report;
pub mod verify;

pub use smoothinglab_core as core;
pub use smoothinglab_core::stats;

use clap::{Subcommand, ValueEnum};
use smoothinglab_core::rng::Streams;
use smoothinglab_core::Error as CoreError;

use crate::config::ExperimentConfig;
use crate::report::{Provenance, Report};

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("runtime budget exceeded: {0}")]
    Budget(String),
    #[error(transparent)]
    Core(CoreError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<CoreError> for LabError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::PopulationCapExceeded { .. } | CoreError::StepCapExceeded { .. } => LabError::Budget(e.to_string()),
            e => LabError::Core(e),
        }
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Io(std::io::Error::other(e))
    }
}

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const BUDGET: i32 = 3;
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Budget(_) => exit::BUDGET,
            _ => exit::CONFIG,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum FixpointOp {
    /// One application of the smoothing transform to `params.initial`.
    Apply,
    /// `params.iters` applications, with the sup-norm change per step.
    Iterate,
    /// `f - Sf` with standard errors and z-scores.
    Residual,
    /// Solution built from martingale limit samples and `params.modulation`.
    Build,
    /// Recover the modulation of a solution.
    Fit,
    /// Distributional check of the additive or min-type equation.
    Sfpe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum FractalOp {
    /// Laplace transform of the total mass against the built solution.
    Campbell,
    /// Marked Poisson atoms over the cylinders of one tree.
    Atoms,
}

/// Acceptance bundles. Models and budgets are fixed; only the seed is read
/// from the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bundle {
    /// Exact instances of the smoothing fixed-point theorem and their tameness.
    Theorem1,
    /// Boundary-case Monte Carlo instance built from derivative-martingale samples.
    Theorem2,
    /// Harmonic functions, ladder quantities and overshoots of killed walks.
    Section4,
    /// Exponent exactness for the dyadic and quarter models.
    Exponent,
    /// Fixed-generation many-to-one identity.
    Many2one,
    /// Many-to-one identity along a first-passage line.
    Stopped,
    /// Martingale property of W_n, Z_n and the truncated Z_n.
    Martingale,
    /// Distributional fixed-point checks.
    Sfpe,
    /// Campbell identity and stationarity of the tree coupling.
    Campbell,
}

impl Bundle {
    pub fn name(self) -> &'static str {
        match self {
            Bundle::Theorem1 => "theorem1",
            Bundle::Theorem2 => "theorem2",
            Bundle::Section4 => "section4",
            Bundle::Exponent => "exponent",
            Bundle::Many2one => "many2one",
            Bundle::Stopped => "stopped",
            Bundle::Martingale => "martingale",
            Bundle::Sfpe => "sfpe",
            Bundle::Campbell => "campbell",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Op {
    /// Characteristic exponent by scan and bisection.
    Exponent,
    /// Moment conditions and regular/boundary classification.
    Conditions,
    /// One tree with per-generation statistics.
    SimulateBrw,
    /// Means of W_n, Z_n and their increments over independent trees.
    Martingale,
    /// First-passage line of level `params.a`.
    Line,
    /// Harmonic functions of the walk at `params.xs`.
    Tanaka,
    /// Many-to-one identity (stopped when `params.a` is set).
    Many2one,
    /// Overshoots of the levels `params.levels`.
    Overshoot,
    #[command(subcommand)]
    Fixpoint(FixpointOp),
    #[command(subcommand)]
    Fractal(FractalOp),
    /// Run an acceptance bundle; exit code 1 when a check fails.
    Verify {
        #[arg(value_enum)]
        bundle: Bundle,
    },
}

impl Op {
    /// `(module, operation)` recorded in the provenance line.
    pub fn names(self) -> (&'static str, &'static str) {
        match self {
            Op::Exponent => ("exponent", "solve_alpha"),
            Op::Conditions => ("weights", "condition_report"),
            Op::SimulateBrw => ("brw", "simulate"),
            Op::Martingale => ("brw", "martingale"),
            Op::Line => ("brw", "first_passage_line"),
            Op::Tanaka => ("rwalk", "tanaka"),
            Op::Many2one => ("rwalk", "many_to_one"),
            Op::Overshoot => ("rwalk", "overshoot"),
            Op::Fixpoint(f) => (
                "fixpoint",
                match f {
                    FixpointOp::Apply => "apply",
                    FixpointOp::Iterate => "iterate",
                    FixpointOp::Residual => "residual",
                    FixpointOp::Build => "build",
                    FixpointOp::Fit => "fit",
                    FixpointOp::Sfpe => "sfpe",
                },
            ),
            Op::Fractal(f) => (
                "fractal",
                match f {
                    FractalOp::Campbell => "campbell",
                    FractalOp::Atoms => "atoms",
                },
            ),
            Op::Verify { bundle } => ("verify", bundle.name()),
        }
    }
}

/// Runs `op` with streams derived from `(seed, module/op)`.
pub fn run(op: Op, cfg: &ExperimentConfig, config_hash: &str) -> Result<(Report, Provenance), LabError> {
    let (module, name) = op.names();
    let streams = Streams::new(cfg.seed).sub(module).sub(name);
    let report = match op {
        Op::Exponent => commands::exponent(cfg, &streams)?,
        Op::Conditions => commands::conditions(cfg, &streams)?,
        Op::SimulateBrw => commands::simulate_brw(cfg, &streams)?,
        Op::Martingale => commands::martingale(cfg, &streams)?,
        Op::Line => commands::line(cfg, &streams)?,
        Op::Tanaka => commands::tanaka(cfg, &streams)?,
        Op::Many2one => commands::many2one(cfg, &streams)?,
        Op::Overshoot => commands::overshoot(cfg, &streams)?,
        Op::Fixpoint(f) => match f {
            FixpointOp::Apply => commands::fixpoint_apply(cfg, &streams)?,
            FixpointOp::Iterate => commands::fixpoint_iterate(cfg, &streams)?,
            FixpointOp::Residual => commands::fixpoint_residual(cfg, &streams)?,
            FixpointOp::Build => commands::fixpoint_build(cfg, &streams)?,
            FixpointOp::Fit => commands::fixpoint_fit(cfg, &streams)?,
            FixpointOp::Sfpe => commands::fixpoint_sfpe(cfg, &streams)?,
        },
        Op::Fractal(f) => match f {
            FractalOp::Campbell => commands::fractal_campbell(cfg, &streams)?,
            FractalOp::Atoms => commands::fractal_atoms(cfg, &streams)?,
        },
        Op::Verify { bundle } => verify::run(bundle, &streams)?,
    };
    let prov = Provenance { config_hash: config_hash.into(), module: module.into(), op: name.into(), seed: cfg.seed };
    Ok((report, prov))
}
