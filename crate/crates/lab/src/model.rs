//! JSON schema for weight models.
//!
//! ```json
//! {"family": "deterministic", "params": {"weights": [0.5, 0.5]}, "span": 2}
//! {"family": "gaussian_binary", "params": {"mean": 1.386, "variance": 1.386}}
//! {"family": "iid", "params": {"count": 3, "marginal": {"kind": "uniform", "lo": 0, "hi": 1}}}
//! {"family": "tabulated", "params": {"rows": [{"weights": [], "prob": 0.5},
//!                                             {"weights": [0.4, 0.4, 0.4], "prob": 0.5}]}}
//! ```
//!
//! Marginals are `uniform {lo, hi}`, `beta {a, b}` and `lognormal {mu, sigma2}`.
//! `span` defaults to 1 (non-lattice). Unknown fields are rejected at every level.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use smoothinglab_core::weights::{Family, Marginal, WeightModel};

use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: String,
    pub params: Value,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub span: f64,
}

fn one() -> f64 {
    1.0
}

fn is_one(x: &f64) -> bool {
    *x == 1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeterministicParams {
    weights: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaussianParams {
    mean: f64,
    variance: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IidParams {
    count: usize,
    marginal: MarginalSpec,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum MarginalSpec {
    Uniform { lo: f64, hi: f64 },
    Beta { a: f64, b: f64 },
    Lognormal { mu: f64, sigma2: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Row {
    weights: Vec<f64>,
    prob: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TabulatedParams {
    rows: Vec<Row>,
}

fn params<T: for<'de> Deserialize<'de>>(family: &str, v: &Value) -> Result<T, LabError> {
    serde_json::from_value(v.clone()).map_err(|e| LabError::Config(format!("params of family `{family}`: {e}")))
}

impl ModelSpec {
    pub fn build(&self) -> Result<WeightModel, LabError> {
        let family = match self.family.as_str() {
            "deterministic" => Family::Deterministic(params::<DeterministicParams>(&self.family, &self.params)?.weights),
            "gaussian_binary" => {
                let p: GaussianParams = params(&self.family, &self.params)?;
                Family::GaussianBinary { mean: p.mean, variance: p.variance }
            }
            "iid" => {
                let p: IidParams = params(&self.family, &self.params)?;
                let marginal = match p.marginal {
                    MarginalSpec::Uniform { lo, hi } => Marginal::Uniform { lo, hi },
                    MarginalSpec::Beta { a, b } => Marginal::Beta { a, b },
                    MarginalSpec::Lognormal { mu, sigma2 } => Marginal::LogNormal { mu, sigma2 },
                };
                Family::IidCount { count: p.count, marginal }
            }
            "tabulated" => {
                let p: TabulatedParams = params(&self.family, &self.params)?;
                Family::Tabulated(p.rows.into_iter().map(|r| (r.weights, r.prob)).collect())
            }
            other => return Err(LabError::Config(format!("unknown family `{other}`"))),
        };
        Ok(WeightModel::new(family, self.span)?)
    }

    /// Spec of an existing model (inverse of [`ModelSpec::build`]).
    pub fn of(model: &WeightModel) -> Self {
        let (family, params) = match model.family() {
            Family::Deterministic(ws) => ("deterministic", serde_json::json!({ "weights": ws })),
            Family::GaussianBinary { mean, variance } => ("gaussian_binary", serde_json::json!({ "mean": mean, "variance": variance })),
            Family::IidCount { count, marginal } => {
                let m = match *marginal {
                    Marginal::Uniform { lo, hi } => MarginalSpec::Uniform { lo, hi },
                    Marginal::Beta { a, b } => MarginalSpec::Beta { a, b },
                    Marginal::LogNormal { mu, sigma2 } => MarginalSpec::Lognormal { mu, sigma2 },
                };
                ("iid", serde_json::json!({ "count": count, "marginal": m }))
            }
            Family::Tabulated(rows) => {
                let rows: Vec<Value> = rows.iter().map(|(w, p)| serde_json::json!({ "weights": w, "prob": p })).collect();
                ("tabulated", serde_json::json!({ "rows": rows }))
            }
        };
        ModelSpec { family: family.into(), params, span: model.span() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<WeightModel, LabError> {
        let spec: ModelSpec = serde_json::from_str(s).map_err(|e| LabError::Config(e.to_string()))?;
        spec.build()
    }

    #[test]
    fn families_round_trip() {
        for s in [
            r#"{"family":"deterministic","params":{"weights":[0.5,0.5]},"span":2}"#,
            r#"{"family":"gaussian_binary","params":{"mean":1.0,"variance":0.5}}"#,
            r#"{"family":"iid","params":{"count":3,"marginal":{"kind":"beta","a":2,"b":3}}}"#,
            r#"{"family":"tabulated","params":{"rows":[{"weights":[],"prob":0.5},{"weights":[0.4,0.4,0.4],"prob":0.5}]}}"#,
        ] {
            let m = parse(s).unwrap();
            assert_eq!(ModelSpec::of(&m).build().unwrap(), m);
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(parse(r#"{"family":"deterministic","params":{"weights":[0.5]},"colour":1}"#).is_err());
        assert!(parse(r#"{"family":"deterministic","params":{"weights":[0.5],"extra":0}}"#).is_err());
        assert!(parse(r#"{"family":"iid","params":{"count":2,"marginal":{"kind":"uniform","lo":0,"hi":1,"x":1}}}"#).is_err());
        assert!(parse(r#"{"family":"cauchy","params":{}}"#).is_err());
        assert!(parse(r#"{"family":"deterministic","params":{"weights":[-0.5]}}"#).is_err());
    }
}
