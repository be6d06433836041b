//! Experiment configuration files.
//!
//! Only `seed` is mandatory. Subcommands read the parts they need and fail
//! with a configuration error when a required part is missing.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smoothinglab_core::fixpoint::{self, LimitKind, Modulation};
use smoothinglab_core::fractal::MassMode;
use smoothinglab_core::rwalk::{self, IncrementLaw};
use smoothinglab_core::weights::WeightModel;

use crate::model::ModelSpec;
use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub alpha: Option<AlphaSpec>,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub params: Params,
}

/// A fixed exponent or a request to solve for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Value(f64),
    Solve { solve: SolveSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSpec {
    #[serde(default = "default_bracket")]
    pub bracket: [f64; 2],
    #[serde(default = "default_tol")]
    pub tol: f64,
}

impl Default for SolveSpec {
    fn default() -> Self {
        SolveSpec { bracket: default_bracket(), tol: default_tol() }
    }
}

fn default_bracket() -> [f64; 2] {
    [0.01, 20.0]
}

fn default_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Monte Carlo replicates.
    pub reps: usize,
    /// Tree depth.
    pub generations: usize,
    pub pop_cap: usize,
    pub step_cap: usize,
    /// Weight sequences sampled for moment estimates.
    pub moment_budget: usize,
    /// Thinning floor for streaming sweeps (0 disables thinning).
    pub floor: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            reps: 10_000,
            generations: 10,
            pop_cap: 1 << 20,
            step_cap: rwalk::DEFAULT_STEP_CAP,
            moment_budget: 100_000,
            floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// `t0 2^(k / per_octave)` for `k < points`.
    Dyadic { t0: f64, per_octave: usize, points: usize },
    /// `points` log-spaced values in `[lo, hi]`.
    Log { lo: f64, hi: f64, points: usize },
    Points { ts: Vec<f64> },
}

impl GridSpec {
    pub fn build(&self) -> Result<Vec<f64>, LabError> {
        let ts = match self {
            GridSpec::Dyadic { t0, per_octave, points } => {
                if !(*t0 > 0.0) || *per_octave == 0 || *points < 2 {
                    return Err(LabError::Config("dyadic grid needs t0 > 0, per_octave >= 1, points >= 2".into()));
                }
                fixpoint::dyadic_grid(*t0, *per_octave, *points)
            }
            GridSpec::Log { lo, hi, points } => {
                if !(*lo > 0.0 && hi > lo) || *points < 2 {
                    return Err(LabError::Config("log grid needs 0 < lo < hi and points >= 2".into()));
                }
                fixpoint::log_grid(*lo, *hi, *points)
            }
            GridSpec::Points { ts } => {
                if ts.is_empty() || ts[0] <= 0.0 || ts.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(LabError::Config("grid points must be positive and increasing".into()));
                }
                ts.clone()
            }
        };
        Ok(ts)
    }
}

/// Increment law of a walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WalkSpec {
    /// Symmetric +-1 steps.
    Pm1,
    Normal { mean: f64, variance: f64 },
    Discrete { atoms: Vec<f64>, probs: Vec<f64> },
    /// The size-biased increment of the configured model at `alpha`.
    Model,
}

/// Path functionals for the many-to-one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalSpec {
    One,
    /// Indicator that the final position lies below `level`.
    Below { level: f64 },
    /// Indicator that the whole path stays above `-level`.
    StaysAbove { level: f64 },
}

impl FunctionalSpec {
    pub fn eval(&self, path: &[f64]) -> f64 {
        match *self {
            FunctionalSpec::One => 1.0,
            FunctionalSpec::Below { level } => {
                if path.last().copied().unwrap_or(0.0) < level { 1.0 } else { 0.0 }
            }
            FunctionalSpec::StaysAbove { level } => {
                if path.iter().all(|&s| s > -level) { 1.0 } else { 0.0 }
            }
        }
    }
}

/// Starting functions for the smoothing transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `exp(-c t^power)`.
    ExpPower { c: f64, power: f64 },
    /// `1 / (1 + c t)`.
    Rational { c: f64 },
    Constant { value: f64 },
    /// A grid function previously written as CSV or JSON.
    File { path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModulationSpec {
    Constant { c: f64 },
    /// `exp(eps sin(2 pi log_r t))`.
    Sine { r: f64, eps: f64 },
}

impl ModulationSpec {
    pub fn build(&self, alpha: f64) -> Result<Modulation, LabError> {
        Ok(match *self {
            ModulationSpec::Constant { c } => Modulation::constant(c, alpha)?,
            ModulationSpec::Sine { r, eps } => Modulation::sine(r, alpha, eps)?,
        })
    }
}

/// Samplers for the distributional fixed-point checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    One,
    /// `1 / (2 N^2)` with `N` standard normal.
    HalfStable,
    PositiveStable { alpha: f64 },
    Exponential { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindSpec {
    Additive,
    Derivative,
}

impl KindSpec {
    pub fn limit(self) -> LimitKind {
        match self {
            KindSpec::Additive => LimitKind::Additive,
            KindSpec::Derivative => LimitKind::Derivative,
        }
    }

    pub fn mass(self) -> MassMode {
        match self {
            KindSpec::Additive => MassMode::Regular,
            KindSpec::Derivative => MassMode::Boundary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SfpeSpec {
    Additive,
    Min,
}

/// Subcommand parameters; each subcommand documents which it reads.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub x: Option<f64>,
    pub xs: Option<Vec<f64>>,
    pub ys: Option<Vec<f64>>,
    pub a: Option<f64>,
    pub levels: Option<Vec<f64>>,
    pub t: Option<f64>,
    pub ts: Option<Vec<f64>>,
    pub iters: Option<usize>,
    pub walk: Option<WalkSpec>,
    pub functional: Option<FunctionalSpec>,
    pub initial: Option<FunctionSpec>,
    pub modulation: Option<ModulationSpec>,
    pub kind: Option<KindSpec>,
    pub sampler: Option<SamplerSpec>,
    pub sfpe: Option<SfpeSpec>,
    pub c: Option<f64>,
    pub depth: Option<usize>,
    pub xi_min: Option<f64>,
    pub period: Option<f64>,
    pub z_tol: Option<f64>,
    pub resolution: Option<f64>,
    pub tol: Option<f64>,
}

impl ExperimentConfig {
    /// Reads and validates a configuration file. Returns the config and the
    /// SHA-256 of the file contents.
    pub fn load(path: &Path) -> Result<(Self, String), LabError> {
        let text = std::fs::read(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_slice(&text).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok((cfg, hex(&Sha256::digest(&text))))
    }

    pub fn from_json(text: &str) -> Result<Self, LabError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let b = &self.budgets;
        if b.reps == 0 || b.generations == 0 || b.pop_cap == 0 || b.step_cap == 0 || b.moment_budget == 0 {
            return Err(LabError::Config("all budgets must be positive".into()));
        }
        if !(b.floor >= 0.0 && b.floor.is_finite()) {
            return Err(LabError::Config("floor must be finite and nonnegative".into()));
        }
        if let Some(m) = &self.model {
            m.build()?;
        }
        if let Some(g) = &self.grid {
            g.build()?;
        }
        match self.alpha {
            Some(AlphaSpec::Value(a)) if !(a > 0.0 && a.is_finite()) => Err(LabError::Config(format!("alpha {a} must be positive"))),
            Some(AlphaSpec::Solve { solve }) if !(solve.bracket[0] > 0.0 && solve.bracket[1] > solve.bracket[0] && solve.tol > 0.0) => {
                Err(LabError::Config("solve bracket must satisfy 0 < lo < hi and tol > 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn model(&self) -> Result<WeightModel, LabError> {
        self.model.as_ref().ok_or_else(|| missing("model"))?.build()
    }

    pub fn grid(&self) -> Result<Vec<f64>, LabError> {
        match &self.grid {
            Some(g) => g.build(),
            None => Ok(fixpoint::default_grid()),
        }
    }

    pub fn walk_law(&self, alpha: impl FnOnce() -> Result<f64, LabError>) -> Result<IncrementLaw, LabError> {
        Ok(match self.params.walk.as_ref().ok_or_else(|| missing("params.walk"))? {
            WalkSpec::Pm1 => IncrementLaw::symmetric_pm1(),
            WalkSpec::Normal { mean, variance } => IncrementLaw::normal(*mean, *variance)?,
            WalkSpec::Discrete { atoms, probs } => IncrementLaw::discrete(atoms, probs)?,
            WalkSpec::Model => rwalk::make_increment_law(&self.model()?, alpha()?, self.params.tol.unwrap_or(1e-9))?,
        })
    }
}

pub fn missing(what: &str) -> LabError {
    LabError::Config(format!("config is missing `{what}`"))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = ExperimentConfig::from_json(r#"{"seed": 7}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.budgets, Budgets::default());
        assert_eq!(c.grid().unwrap().len(), fixpoint::DEFAULT_POINTS);
    }

    #[test]
    fn seed_is_mandatory_and_budgets_positive() {
        assert!(ExperimentConfig::from_json("{}").is_err());
        assert!(ExperimentConfig::from_json(r#"{"seed": 1, "budgets": {"reps": 0}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"seed": 1, "unknown": 0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"seed": 1, "params": {"xx": 0}}"#).is_err());
    }

    #[test]
    fn alpha_forms() {
        let c = ExperimentConfig::from_json(r#"{"seed": 1, "alpha": 0.5}"#).unwrap();
        assert_eq!(c.alpha, Some(AlphaSpec::Value(0.5)));
        let c = ExperimentConfig::from_json(r#"{"seed": 1, "alpha": {"solve": {"bracket": [0.1, 3]}}}"#).unwrap();
        assert!(matches!(c.alpha, Some(AlphaSpec::Solve { solve }) if solve.bracket == [0.1, 3.0] && solve.tol == 1e-12));
        assert!(ExperimentConfig::from_json(r#"{"seed": 1, "alpha": -1}"#).is_err());
    }

    #[test]
    fn functionals() {
        assert_eq!(FunctionalSpec::Below { level: 1.0 }.eval(&[0.5, 2.0]), 0.0);
        assert_eq!(FunctionalSpec::StaysAbove { level: 1.0 }.eval(&[0.5, -0.5]), 1.0);
        assert_eq!(FunctionalSpec::One.eval(&[]), 1.0);
    }
}
