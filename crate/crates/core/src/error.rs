use alloc::boxed::Box;
use alloc::string::String;

use crate::brw::Tree;
use crate::rwalk::WalkPath;

/// Errors raised by the simulation and verification routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid weight model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("m(theta) - 1 has constant sign on the scan grid of [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },

    #[error("Monte Carlo noise prevents a sign decision near theta = {theta}")]
    StochasticAmbiguity { theta: f64 },

    /// Generation `generation` would have held more than the cap. Tree
    /// simulations return the tree built so far; streaming sweeps keep no tree.
    #[error("population cap {cap} exceeded at generation {generation}")]
    PopulationCapExceeded {
        cap: usize,
        generation: usize,
        partial: Option<Box<Tree>>,
    },

    #[error("generation {0} is missing from the tree")]
    GenerationMissing(usize),

    #[error("step cap {cap} exceeded")]
    StepCapExceeded {
        cap: usize,
        partial: Option<Box<WalkPath>>,
    },

    #[error("increment law not normalized: m(alpha) = {m}")]
    NotNormalized { m: f64 },

    #[error("no rejection envelope available for this marginal")]
    NoEnvelope,

    #[error("model classification does not match the requested martingale")]
    ClassificationMismatch,

    #[error("empty sample set")]
    EmptySamples,

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("grid has no admissible points")]
    DegenerateGrid,

    #[error("stable index {0} outside (0, 1)")]
    InvalidIndex(f64),
}

pub type Result<T> = core::result::Result<T, Error>;
