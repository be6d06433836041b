//! Random weight sequences `T = (T_1, T_2, ...)` and their moment functionals.
//!
//! Every family generates finitely many weights per draw. Zero weights are
//! allowed in a sequence but contribute nothing to any moment sum.

use alloc::format;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::replicate;
use crate::rng::Streams;
use crate::stats::{mean_ci, SummaryStats, DEFAULT_LEVEL};

/// Law of the individual weights of an [`Family::IidCount`] model.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    /// Uniform on `[lo, hi]`, `0 <= lo < hi`.
    Uniform { lo: f64, hi: f64 },
    /// Beta(a, b) on `(0, 1)`.
    Beta { a: f64, b: f64 },
    /// `exp(N(mu, sigma2))`.
    LogNormal { mu: f64, sigma2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// The same sequence on every draw.
    Deterministic(Vec<f64>),
    /// `count` i.i.d. weights with the given marginal.
    IidCount { count: usize, marginal: Marginal },
    /// Two children, `T_j = exp(-X_j)` with `X_j ~ N(mean, variance)` i.i.d.
    GaussianBinary { mean: f64, variance: f64 },
    /// Finitely many sequences with probabilities summing to one.
    Tabulated(Vec<(Vec<f64>, f64)>),
}

/// One realized child of a vertex: its position in the sequence (1-based),
/// its weight and the log-step `-ln weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Child {
    pub index: u32,
    pub weight: f64,
    pub step: f64,
}

/// A nonincreasing finite sequence of nonnegative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence(Vec<f64>);

impl WeightSequence {
    pub fn new(mut weights: Vec<f64>) -> Self {
        weights.sort_by(|a, b| b.total_cmp(a));
        WeightSequence(weights)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `sum_j T_j^theta` over positive weights.
    pub fn power_sum(&self, theta: f64) -> f64 {
        power_sum(&self.0, theta)
    }

    pub fn positive_count(&self) -> usize {
        self.0.iter().filter(|&&t| t > 0.0).count()
    }
}

fn digamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 20.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    acc + x.ln() - 0.5 / x - r * (1.0 / 12.0 - r * (1.0 / 120.0 - r * (1.0 / 252.0 - r * (1.0 / 240.0 - r / 132.0))))
}

fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 20.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / (x * x);
    acc + 1.0 / x + r / 2.0 + r / x * (1.0 / 6.0 - r * (1.0 / 30.0 - r * (1.0 / 42.0 - r / 30.0)))
}

pub(crate) fn power_sum(ws: &[f64], theta: f64) -> f64 {
    ws.iter().filter(|&&t| t > 0.0).map(|&t| t.powf(theta)).sum()
}

fn log_power_sum(ws: &[f64], theta: f64, k: i32) -> f64 {
    ws.iter()
        .filter(|&&t| t > 0.0)
        .map(|&t| t.powf(theta) * t.ln().powi(k))
        .sum()
}

/// A generative model of the weight sequence together with its declared
/// span (`1` meaning nongeometric).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightModel {
    family: Family,
    span: f64,
    // -ln t for the fixed sequences, computed once so that tree positions and
    // walk increments agree bit for bit.
    steps: Vec<Vec<f64>>,
    cumulative: Vec<f64>,
}

fn invalid(msg: alloc::string::String) -> Error {
    Error::InvalidModel(msg)
}

fn check_weights(ws: &[f64]) -> Result<()> {
    for &w in ws {
        if !(w.is_finite() && w >= 0.0) {
            return Err(invalid(format!("weight {w} is not a finite nonnegative number")));
        }
    }
    Ok(())
}

fn sorted_desc(mut ws: Vec<f64>) -> Vec<f64> {
    ws.sort_by(|a, b| b.total_cmp(a));
    ws
}

fn neg_ln(ws: &[f64]) -> Vec<f64> {
    ws.iter().map(|&t| if t > 0.0 { -(t.ln()) } else { f64::INFINITY }).collect()
}

impl WeightModel {
    pub fn new(family: Family, span: f64) -> Result<Self> {
        if !(span.is_finite() && span >= 1.0) {
            return Err(invalid(format!("span {span} must be >= 1")));
        }
        let mut steps = Vec::new();
        let mut cumulative = Vec::new();
        let family = match family {
            Family::Deterministic(ws) => {
                check_weights(&ws)?;
                let ws = sorted_desc(ws);
                steps.push(neg_ln(&ws));
                Family::Deterministic(ws)
            }
            Family::Tabulated(rows) => {
                if rows.is_empty() {
                    return Err(invalid("tabulated model has no rows".into()));
                }
                let mut total = 0.0;
                let mut out = Vec::with_capacity(rows.len());
                for (ws, p) in rows {
                    check_weights(&ws)?;
                    if !(p.is_finite() && p >= 0.0) {
                        return Err(invalid(format!("probability {p} is invalid")));
                    }
                    total += p;
                    cumulative.push(total);
                    let ws = sorted_desc(ws);
                    steps.push(neg_ln(&ws));
                    out.push((ws, p));
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(invalid(format!("probabilities sum to {total}, not 1")));
                }
                Family::Tabulated(out)
            }
            Family::GaussianBinary { mean, variance } => {
                if !(mean.is_finite() && variance.is_finite() && variance > 0.0) {
                    return Err(invalid(format!(
                        "gaussian binary needs finite mean and variance > 0, got ({mean}, {variance})"
                    )));
                }
                Family::GaussianBinary { mean, variance }
            }
            Family::IidCount { count, marginal } => {
                match marginal {
                    Marginal::Uniform { lo, hi } => {
                        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                            return Err(invalid(format!("uniform marginal needs 0 <= lo < hi, got [{lo}, {hi}]")));
                        }
                    }
                    Marginal::Beta { a, b } => {
                        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                            return Err(invalid(format!("beta marginal needs a, b > 0, got ({a}, {b})")));
                        }
                    }
                    Marginal::LogNormal { mu, sigma2 } => {
                        if !(mu.is_finite() && sigma2.is_finite() && sigma2 > 0.0) {
                            return Err(invalid(format!("lognormal marginal needs sigma2 > 0, got ({mu}, {sigma2})")));
                        }
                    }
                }
                Family::IidCount { count, marginal }
            }
        };
        Ok(WeightModel {
            family,
            span,
            steps,
            cumulative,
        })
    }

    pub fn deterministic(ws: &[f64]) -> Result<Self> {
        Self::new(Family::Deterministic(ws.to_vec()), 1.0)
    }

    pub fn gaussian_binary(mean: f64, variance: f64) -> Result<Self> {
        Self::new(Family::GaussianBinary { mean, variance }, 1.0)
    }

    pub fn tabulated(rows: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        Self::new(Family::Tabulated(rows), 1.0)
    }

    pub fn iid(count: usize, marginal: Marginal) -> Result<Self> {
        Self::new(Family::IidCount { count, marginal }, 1.0)
    }

    /// Same model with a declared span.
    pub fn with_span(self, span: f64) -> Result<Self> {
        Self::new(self.family, span)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    /// True when every draw is the same sequence.
    pub fn is_deterministic(&self) -> bool {
        matches!(self.family, Family::Deterministic(_))
    }

    /// Support of the model when it is finite: `(sequence, -ln sequence, probability)`.
    pub fn finite_support(&self) -> Option<Vec<(&[f64], &[f64], f64)>> {
        match &self.family {
            Family::Deterministic(ws) => Some(alloc::vec![(ws.as_slice(), self.steps[0].as_slice(), 1.0)]),
            Family::Tabulated(rows) => Some(
                rows.iter()
                    .zip(&self.steps)
                    .map(|((ws, p), st)| (ws.as_slice(), st.as_slice(), *p))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Exact expectation of a functional of the sequence, for finite-support models.
    pub fn expect_exact<F: Fn(&[f64]) -> f64>(&self, f: F) -> Option<f64> {
        self.finite_support()
            .map(|rows| rows.iter().map(|(ws, _, p)| if *p > 0.0 { p * f(ws) } else { 0.0 }).sum())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WeightSequence {
        let mut out = Vec::new();
        self.fill(rng, &mut out);
        WeightSequence(out)
    }

    /// Draws one sequence into `out` (sorted nonincreasing).
    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        match &self.family {
            Family::Deterministic(ws) => out.extend_from_slice(ws),
            Family::Tabulated(rows) => {
                let k = self.pick_row(rng);
                out.extend_from_slice(&rows[k].0);
            }
            Family::GaussianBinary { mean, variance } => {
                let sd = variance.sqrt();
                for _ in 0..2 {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push((-(mean + sd * z)).exp());
                }
                out.sort_by(|a, b| b.total_cmp(a));
            }
            Family::IidCount { count, marginal } => {
                for _ in 0..*count {
                    out.push(sample_marginal(marginal, rng));
                }
                out.sort_by(|a, b| b.total_cmp(a));
            }
        }
    }

    /// Draws the positive children of one vertex.
    pub fn children<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<Child>) {
        out.clear();
        match &self.family {
            Family::Deterministic(ws) => push_fixed(ws, &self.steps[0], out),
            Family::Tabulated(rows) => {
                let k = self.pick_row(rng);
                push_fixed(&rows[k].0, &self.steps[k], out);
            }
            Family::GaussianBinary { mean, variance } => {
                let sd = variance.sqrt();
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let (x1, x2) = (mean + sd * z1, mean + sd * z2);
                let (a, b) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
                out.push(Child { index: 1, weight: (-a).exp(), step: a });
                out.push(Child { index: 2, weight: (-b).exp(), step: b });
            }
            Family::IidCount { .. } => {
                let mut ws = Vec::new();
                self.fill(rng, &mut ws);
                for (j, &w) in ws.iter().enumerate() {
                    if w > 0.0 {
                        out.push(Child { index: j as u32 + 1, weight: w, step: -(w.ln()) });
                    }
                }
            }
        }
    }

    /// Draws the steps `-log T` of the positive children of one vertex,
    /// without forming the weights for the Gaussian family.
    pub fn child_steps<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        match &self.family {
            Family::GaussianBinary { mean, variance } => {
                let sd = variance.sqrt();
                for _ in 0..2 {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(mean + sd * z);
                }
            }
            Family::IidCount { count, marginal } => {
                for _ in 0..*count {
                    let w = sample_marginal(marginal, rng);
                    if w > 0.0 {
                        out.push(-(w.ln()));
                    }
                }
            }
            Family::Deterministic(ws) => push_steps(ws, &self.steps[0], out),
            Family::Tabulated(rows) => {
                let k = self.pick_row(rng);
                push_steps(&rows[k].0, &self.steps[k], out);
            }
        }
    }

    fn pick_row<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1)
    }

    /// Closed form of `m(theta) = E sum_j T_j^theta`, when the family has one.
    pub fn closed_moment(&self, theta: f64) -> Option<f64> {
        match &self.family {
            Family::Deterministic(_) | Family::Tabulated(_) => {
                self.expect_exact(|ws| power_sum(ws, theta))
            }
            Family::GaussianBinary { mean, variance } => {
                Some(2.0 * (-theta * mean + theta * theta * variance / 2.0).exp())
            }
            Family::IidCount { count, marginal } => {
                let n = *count as f64;
                match *marginal {
                    Marginal::Uniform { lo, hi } => {
                        let p = theta + 1.0;
                        Some(n * (hi.powf(p) - lo.powf(p)) / (p * (hi - lo)))
                    }
                    Marginal::Beta { a, b } => Some(
                        n * (libm::lgamma(a + theta) + libm::lgamma(a + b)
                            - libm::lgamma(a)
                            - libm::lgamma(a + b + theta))
                            .exp(),
                    ),
                    Marginal::LogNormal { mu, sigma2 } => {
                        Some(n * (theta * mu + theta * theta * sigma2 / 2.0).exp())
                    }
                }
            }
        }
    }

    /// Closed form of `E sum_j T_j^theta (log T_j)^k` for `k` in {1, 2}.
    pub fn closed_log_moment(&self, theta: f64, k: i32) -> Option<f64> {
        debug_assert!(k == 1 || k == 2);
        match &self.family {
            Family::Deterministic(_) | Family::Tabulated(_) => {
                self.expect_exact(|ws| log_power_sum(ws, theta, k))
            }
            Family::GaussianBinary { mean, variance } => {
                let e = (-theta * mean + theta * theta * variance / 2.0).exp();
                let m = mean - theta * variance;
                Some(match k {
                    1 => -2.0 * m * e,
                    _ => 2.0 * e * (m * m + variance),
                })
            }
            Family::IidCount { count, marginal } => {
                let n = *count as f64;
                match *marginal {
                    Marginal::LogNormal { mu, sigma2 } => {
                        let e = (theta * mu + theta * theta * sigma2 / 2.0).exp();
                        let m = mu + theta * sigma2;
                        Some(n * match k {
                            1 => m * e,
                            _ => e * (m * m + sigma2),
                        })
                    }
                    Marginal::Uniform { lo, hi } => {
                        let p = theta + 1.0;
                        let anti = |u: f64| -> f64 {
                            if u <= 0.0 {
                                return 0.0;
                            }
                            let l = u.ln();
                            match k {
                                1 => u.powf(p) * (l / p - 1.0 / (p * p)),
                                _ => u.powf(p) * (l * l / p - 2.0 * l / (p * p) + 2.0 / (p * p * p)),
                            }
                        };
                        Some(n * (anti(hi) - anti(lo)) / (hi - lo))
                    }
                    Marginal::Beta { a, b } => {
                        let e = self.closed_moment(theta)? / n;
                        let d = digamma(a + theta) - digamma(a + b + theta);
                        Some(n * e * match k {
                            1 => d,
                            _ => d * d + trigamma(a + theta) - trigamma(a + b + theta),
                        })
                    }
                }
            }
        }
    }

    /// Checks that all positive weights of `seq` are integer powers of the
    /// declared span (always true for span 1).
    pub fn span_consistent(&self, seq: &[f64]) -> bool {
        if self.span <= 1.0 {
            return true;
        }
        let lr = self.span.ln();
        seq.iter().filter(|&&t| t > 0.0).all(|&t| {
            let k = t.ln() / lr;
            (k - k.round()).abs() < 1e-9
        })
    }
}

fn push_steps(ws: &[f64], steps: &[f64], out: &mut Vec<f64>) {
    out.extend(ws.iter().zip(steps).filter(|(w, _)| **w > 0.0).map(|(_, s)| *s));
}

fn push_fixed(ws: &[f64], steps: &[f64], out: &mut Vec<Child>) {
    for (j, (&w, &s)) in ws.iter().zip(steps).enumerate() {
        if w > 0.0 {
            out.push(Child { index: j as u32 + 1, weight: w, step: s });
        }
    }
}

pub(crate) fn sample_marginal<R: Rng + ?Sized>(m: &Marginal, rng: &mut R) -> f64 {
    match *m {
        Marginal::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        Marginal::Beta { a, b } => Beta::new(a, b).expect("validated beta parameters").sample(rng),
        Marginal::LogNormal { mu, sigma2 } => Normal::new(mu, sigma2.sqrt())
            .expect("validated lognormal parameters")
            .sample(rng)
            .exp(),
    }
}

const BATCH: usize = 4096;

/// Evaluates `f` on `budget` independent draws of the model.
pub fn sample_functional<F>(model: &WeightModel, budget: usize, streams: &Streams, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let batches = budget.div_ceil(BATCH);
    let parts = replicate::map(batches, |b| {
        let mut rng = streams.rng(b as u64);
        let len = BATCH.min(budget - b * BATCH);
        let mut buf = Vec::new();
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            model.fill(&mut rng, &mut buf);
            out.push(f(&buf));
        }
        out
    });
    parts.into_iter().flatten().collect()
}

/// Draws `budget` whole sequences (used for common random numbers).
pub fn sample_sequences(model: &WeightModel, budget: usize, streams: &Streams) -> Vec<Vec<f64>> {
    let batches = budget.div_ceil(BATCH);
    let parts = replicate::map(batches, |b| {
        let mut rng = streams.rng(b as u64);
        let len = BATCH.min(budget - b * BATCH);
        (0..len)
            .map(|_| {
                let mut buf = Vec::new();
                model.fill(&mut rng, &mut buf);
                buf
            })
            .collect::<Vec<_>>()
    });
    parts.into_iter().flatten().collect()
}

fn estimate<F>(model: &WeightModel, budget: usize, streams: &Streams, f: F) -> Result<SummaryStats>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    if let Some(v) = model.expect_exact(&f) {
        return Ok(SummaryStats::exact(v));
    }
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    mean_ci(&sample_functional(model, budget, streams, f), DEFAULT_LEVEL)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

/// Estimate of `m(theta) = E sum_j T_j^theta`. Closed forms are returned
/// with zero standard error.
pub fn moment(model: &WeightModel, theta: f64, budget: usize, streams: &Streams) -> Result<SummaryStats> {
    check_positive("theta", theta)?;
    if let Some(v) = model.closed_moment(theta) {
        return Ok(SummaryStats::exact(v));
    }
    estimate(model, budget, streams, |ws| power_sum(ws, theta))
}

/// Estimate of `E sum_j T_j^alpha log T_j` with `0 log 0 := 0`.
pub fn log_moment(model: &WeightModel, alpha: f64, budget: usize, streams: &Streams) -> Result<SummaryStats> {
    check_positive("alpha", alpha)?;
    if let Some(v) = model.closed_log_moment(alpha, 1) {
        return Ok(SummaryStats::exact(v));
    }
    estimate(model, budget, streams, |ws| log_power_sum(ws, alpha, 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// `E sum T^alpha log T < 0`.
    Regular,
    /// `E sum T^alpha log T = 0`.
    Boundary,
    Indeterminate,
}

/// Conditions that a report found violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// Expected number of positive weights is at most one.
    NotSupercritical,
    /// `m(alpha)` differs from one beyond its interval.
    NotNormalized,
    /// `E sum T^alpha log T > 0`.
    PositiveDerivative,
    /// A running estimate is dominated by a few draws; the moment may be infinite.
    HeavyTail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub alpha: f64,
    pub supercritical: SummaryStats,
    pub m_alpha: SummaryStats,
    pub m_prime_alpha: SummaryStats,
    pub m_second_alpha: SummaryStats,
    pub w_log_w: SummaryStats,
    pub w_log2_w: SummaryStats,
    pub xtilde_log_xtilde: SummaryStats,
    pub classification: Classification,
    pub violations: Vec<Violation>,
}

/// Default resolution below which a derivative estimate counts as zero.
pub const DEFAULT_RESOLUTION: f64 = 1e-3;

/// Classification rule applied to an estimate of `m'(alpha)`.
pub fn classify_derivative(d: &SummaryStats, resolution: f64) -> Classification {
    let band = 3.0 * d.stderr;
    if band <= resolution && d.mean.abs() <= resolution + band {
        Classification::Boundary
    } else if d.mean + band < 0.0 {
        Classification::Regular
    } else {
        Classification::Indeterminate
    }
}

fn xlogx(x: f64, k: i32) -> f64 {
    if x > 0.0 {
        x * x.ln().powi(k)
    } else {
        0.0
    }
}

fn dominated(samples: &[f64]) -> bool {
    let total: f64 = samples.iter().map(|x| x.abs()).sum();
    let max = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    samples.len() >= 100 && total > 0.0 && max / total > 0.25
}

/// Evaluates every moment condition at `alpha`.
pub fn condition_report(
    model: &WeightModel,
    alpha: f64,
    budget: usize,
    resolution: f64,
    streams: &Streams,
) -> Result<ConditionReport> {
    check_positive("alpha", alpha)?;
    let mut violations = Vec::new();
    let mut heavy = false;
    let mut est = |tag: &str, f: &(dyn Fn(&[f64]) -> f64 + Sync)| -> Result<SummaryStats> {
        if let Some(v) = model.expect_exact(f) {
            return Ok(SummaryStats::exact(v));
        }
        let s = sample_functional(model, budget.max(1), &streams.sub(tag), f);
        heavy |= dominated(&s);
        mean_ci(&s, DEFAULT_LEVEL)
    };
    let supercritical = est("count", &|ws| ws.iter().filter(|&&t| t > 0.0).count() as f64)?;
    let m_alpha = match model.closed_moment(alpha) {
        Some(v) => SummaryStats::exact(v),
        None => est("m", &|ws| power_sum(ws, alpha))?,
    };
    let m_prime_alpha = match model.closed_log_moment(alpha, 1) {
        Some(v) => SummaryStats::exact(v),
        None => est("m1", &|ws| log_power_sum(ws, alpha, 1))?,
    };
    let m_second_alpha = match model.closed_log_moment(alpha, 2) {
        Some(v) => SummaryStats::exact(v),
        None => est("m2", &|ws| log_power_sum(ws, alpha, 2))?,
    };
    let w_log_w = est("wlogw", &|ws| xlogx(power_sum(ws, alpha), 1))?;
    let w_log2_w = est("wlog2w", &|ws| xlogx(power_sum(ws, alpha), 2))?;
    let xtilde_log_xtilde = est("xtilde", &|ws| {
        let xt: f64 = ws
            .iter()
            .filter(|&&t| t > 1.0)
            .map(|&t| t.powf(alpha) * t.ln())
            .sum();
        xlogx(xt, 1)
    })?;

    if supercritical.mean + 3.0 * supercritical.stderr <= 1.0 {
        violations.push(Violation::NotSupercritical);
    }
    if (m_alpha.mean - 1.0).abs() > 3.0 * m_alpha.stderr + 1e-9 {
        violations.push(Violation::NotNormalized);
    }
    let classification = classify_derivative(&m_prime_alpha, resolution);
    if m_prime_alpha.mean - 3.0 * m_prime_alpha.stderr > 0.0 && classification != Classification::Boundary {
        violations.push(Violation::PositiveDerivative);
    }
    if heavy {
        violations.push(Violation::HeavyTail);
    }
    Ok(ConditionReport {
        alpha,
        supercritical,
        m_alpha,
        m_prime_alpha,
        m_second_alpha,
        w_log_w,
        w_log2_w,
        xtilde_log_xtilde,
        classification,
        violations,
    })
}

/// Samples `n` sequences and checks each against the declared span.
pub fn verify_span(model: &WeightModel, n: usize, streams: &Streams) -> bool {
    sample_sequences(model, n, streams)
        .iter()
        .all(|s| model.span_consistent(s))
}
