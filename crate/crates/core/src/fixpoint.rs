//! Grid representations of nonincreasing functions `f: [0, inf) -> [0, 1]`,
//! the smoothing transform `(Sf)(t) = E prod_j f(t T_j)`, the solutions
//! `f(t) = E exp(-h(t) t^alpha W)` (or with `Z` in place of `W`), and the
//! distributional fixed-point checks.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::Rng;

use crate::brw;
use crate::error::{Error, Result};
use crate::replicate;
use crate::rng::{Rng64, Streams};
use crate::stats::{ks_two_sample, mean_ci, median, z_score, KsReport, SummaryStats, DEFAULT_LEVEL};
use crate::weights::{self, Classification, WeightModel, DEFAULT_RESOLUTION};

/// Number of points of the default grid.
pub const DEFAULT_POINTS: usize = 512;
/// Smallest point of the default grid.
pub const DEFAULT_START: f64 = 1e-4;
/// Points per doubling of the default grid. Halving or quartering a grid
/// point lands on another grid point.
pub const DEFAULT_PER_OCTAVE: usize = 22;

/// `n` points `t0 * 2^(k / per_octave)`.
pub fn dyadic_grid(t0: f64, per_octave: usize, n: usize) -> Vec<f64> {
    (0..n).map(|k| t0 * (k as f64 / per_octave as f64).exp2()).collect()
}

/// The default 512-point grid starting at `1e-4` (top point about 980).
pub fn default_grid() -> Vec<f64> {
    dyadic_grid(DEFAULT_START, DEFAULT_PER_OCTAVE, DEFAULT_POINTS)
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let r = (hi / lo).ln();
    (0..n).map(|k| lo * (r * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Extension of a grid function below its first point `t_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LowerTail {
    /// `f(t) = 1`.
    One,
    /// `f(t) = f(t_1)`.
    Hold,
    /// `f(t) = f(t r^k)^(r^(-k alpha))` with `k` the least integer putting
    /// `t r^k` on the grid; for `period = 1` this is `f(t_1)^((t / t_1)^alpha)`.
    SelfSimilar { alpha: f64, period: f64 },
}

/// A nonincreasing `[0, 1]`-valued function sampled on an increasing grid,
/// interpolated linearly in `(log t, f)`, constant above the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    ts: Vec<f64>,
    values: Vec<f64>,
    stderr: Option<Vec<f64>>,
    lower: LowerTail,
    log_ts: Vec<f64>,
    pub alpha: Option<f64>,
    pub provenance: String,
}

impl GridFunction {
    pub fn new(ts: Vec<f64>, values: Vec<f64>, lower: LowerTail) -> Result<Self> {
        if ts.is_empty() || ts.len() != values.len() {
            return Err(Error::InvalidArgument("grid and values must be nonempty and of equal length".into()));
        }
        if !(ts[0] > 0.0) || ts.windows(2).any(|w| !(w[1] > w[0])) || !ts[ts.len() - 1].is_finite() {
            return Err(Error::InvalidArgument("grid must be positive, finite and strictly increasing".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("values must lie in [0, 1]".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("values must be nonincreasing".into()));
        }
        let log_ts = ts.iter().map(|t| t.ln()).collect();
        Ok(GridFunction {
            ts,
            values,
            stderr: None,
            lower,
            log_ts,
            alpha: None,
            provenance: String::new(),
        })
    }

    /// Samples `f` on the grid.
    pub fn from_fn<F: Fn(f64) -> f64>(ts: Vec<f64>, f: F, lower: LowerTail) -> Result<Self> {
        let values = ts.iter().map(|&t| f(t)).collect();
        Self::new(ts, values, lower)
    }

    /// Clamps raw values to `[0, 1]` and replaces them by their decreasing
    /// rearrangement. Returns the function and the largest adjustment.
    pub fn rearranged(ts: Vec<f64>, raw: &[f64], lower: LowerTail) -> Result<(Self, f64)> {
        let mut v: Vec<f64> = raw.iter().map(|x| x.clamp(0.0, 1.0)).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        let adj = raw.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok((Self::new(ts, v, lower)?, adj))
    }

    pub fn with_stderr(mut self, se: Vec<f64>) -> Result<Self> {
        if se.len() != self.ts.len() {
            return Err(Error::InvalidArgument("stderr length must match the grid".into()));
        }
        self.stderr = Some(se);
        Ok(self)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_provenance(mut self, p: impl Into<String>) -> Self {
        self.provenance = p.into();
        self
    }

    pub fn with_lower(mut self, lower: LowerTail) -> Self {
        self.lower = lower;
        self
    }

    pub fn ts(&self) -> &[f64] {
        &self.ts
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stderr(&self) -> Option<&[f64]> {
        self.stderr.as_deref()
    }

    pub fn lower(&self) -> LowerTail {
        self.lower
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    /// Some value lies strictly inside `(0, 1)`.
    pub fn is_nontrivial(&self) -> bool {
        self.values.iter().any(|&v| v > 0.0 && v < 1.0)
    }

    /// Gap `1 - f(t_1)` left by the constant-one extension below the grid.
    pub fn lower_bias_bound(&self) -> f64 {
        1.0 - self.values[0]
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let lt = t.ln();
        let k = self.log_ts.partition_point(|&x| x <= lt).clamp(1, self.ts.len() - 1);
        let (x0, x1) = (self.log_ts[k - 1], self.log_ts[k]);
        (k, ((lt - x0) / (x1 - x0)).clamp(0.0, 1.0))
    }

    fn interp(&self, ys: &[f64], t: f64) -> f64 {
        if ys.len() == 1 {
            return ys[0];
        }
        let (k, w) = self.locate(t);
        if w == 0.0 {
            ys[k - 1]
        } else if w == 1.0 {
            ys[k]
        } else {
            ys[k - 1] + w * (ys[k] - ys[k - 1])
        }
    }

    /// Evaluates the function at `t >= 0`.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.ts.len();
        if t >= self.ts[n - 1] {
            return self.values[n - 1];
        }
        if t >= self.ts[0] {
            return self.interp(&self.values, t);
        }
        match self.lower {
            LowerTail::One => 1.0,
            LowerTail::Hold => self.values[0],
            LowerTail::SelfSimilar { alpha, period } => {
                if t <= 0.0 {
                    return 1.0;
                }
                if period <= 1.0 {
                    self.values[0].powf((t / self.ts[0]).powf(alpha))
                } else {
                    let k = ((self.ts[0] / t).ln() / period.ln()).ceil().max(0.0);
                    let mut s = t * period.powf(k);
                    let mut k = k;
                    if s < self.ts[0] {
                        s *= period;
                        k += 1.0;
                    }
                    self.interp(&self.values, s).powf(period.powf(-k * alpha))
                }
            }
        }
    }

    /// Interpolated standard error at `t` (zero without stored errors).
    pub fn stderr_at(&self, t: f64) -> f64 {
        match &self.stderr {
            None => 0.0,
            Some(se) => {
                let n = se.len();
                if t >= self.ts[n - 1] {
                    se[n - 1]
                } else if t < self.ts[0] {
                    se[0]
                } else {
                    self.interp(se, t)
                }
            }
        }
    }
}

/// The image of a grid function under the smoothing transform.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothed {
    pub f: GridFunction,
    /// Largest change made by clamping and rearrangement.
    pub adjustment: f64,
}

fn product_at(f: &GridFunction, ws: &[f64], t: f64) -> f64 {
    ws.iter().filter(|&&w| w > 0.0).map(|&w| f.eval(t * w)).product()
}

/// `(Sf)(t)` at each `t`: exact for finite-support models, otherwise the
/// mean over `reps` sequences shared by all points.
fn smooth_points(f: &GridFunction, model: &WeightModel, ts: &[f64], reps: usize, streams: &Streams) -> Result<Vec<SummaryStats>> {
    if let Some(rows) = model.finite_support() {
        return Ok(ts
            .iter()
            .map(|&t| SummaryStats::exact(rows.iter().map(|(ws, _, p)| if *p > 0.0 { p * product_at(f, ws, t) } else { 0.0 }).sum()))
            .collect());
    }
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    let seqs = weights::sample_sequences(model, reps, &streams.sub("smoothing"));
    replicate::try_map(ts.len(), |i| {
        let v: Vec<f64> = seqs.iter().map(|ws| product_at(f, ws, ts[i])).collect();
        mean_ci(&v, DEFAULT_LEVEL)
    })
}

/// Applies the smoothing transform on the grid of `f`.
pub fn apply_smoothing(f: &GridFunction, model: &WeightModel, reps: usize, streams: &Streams) -> Result<Smoothed> {
    let pts = smooth_points(f, model, f.ts(), reps, streams)?;
    let raw: Vec<f64> = pts.iter().map(|s| s.mean).collect();
    let (g, adjustment) = GridFunction::rearranged(f.ts().to_vec(), &raw, f.lower())?;
    let mut g = g.with_provenance("smoothing");
    g.alpha = f.alpha;
    if pts.iter().any(|s| !s.is_exact()) {
        g = g.with_stderr(pts.iter().map(|s| s.stderr).collect())?;
    }
    Ok(Smoothed { f: g, adjustment })
}

/// Sup-residuals `sup_i |f_k(t_i) - f_{k+1}(t_i)|` of repeated smoothing,
/// with the final iterate.
pub fn iterate(f0: &GridFunction, model: &WeightModel, iters: usize, reps: usize, streams: &Streams) -> Result<(Vec<(usize, f64)>, GridFunction)> {
    if iters == 0 {
        return Err(Error::InvalidArgument("iters must be at least 1".into()));
    }
    let mut f = f0.clone();
    let mut traj = Vec::with_capacity(iters);
    for k in 0..iters {
        let g = apply_smoothing(&f, model, reps, &streams.sub(&format!("iter{k}")))?.f;
        let sup = f.values().iter().zip(g.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        traj.push((k + 1, sup));
        f = g;
    }
    Ok((traj, f))
}

/// Least-squares `c` in `-log f(t) ~ c t^alpha` over grid points with `0 < f < 1`.
pub fn fit_power_scale(f: &GridFunction, alpha: f64) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (&t, &v) in f.ts().iter().zip(f.values()) {
        if v > 1e-12 && v < 1.0 - 1e-12 {
            let x = t.powf(alpha);
            num += x * -(v.ln());
            den += x * x;
        }
    }
    (den > 0.0).then(|| num / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRow {
    pub t: f64,
    pub f: f64,
    pub sf: f64,
    pub diff: f64,
    pub stderr: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub rows: Vec<ResidualRow>,
    pub sup: f64,
    pub max_abs_z: f64,
}

impl ResidualReport {
    /// Accepts `f` as a fixed point when every `|z| < z_tol` and the
    /// sup-residual is below `abs_floor`.
    pub fn certifies(&self, z_tol: f64, abs_floor: f64) -> bool {
        self.max_abs_z < z_tol && self.sup < abs_floor
    }
}

/// `f - Sf` at the points `ts` (the grid of `f` when `None`).
///
/// The standard error combines the sampling error of `Sf` over weight draws
/// with the stored error of `f` at `t` and its propagation through the
/// product, `E sum_j se(t T_j) prod_{i != j} f(t T_i)`, added linearly.
pub fn residual(f: &GridFunction, model: &WeightModel, reps: usize, ts: Option<&[f64]>, streams: &Streams) -> Result<ResidualReport> {
    let ts: Vec<f64> = ts.map(|s| s.to_vec()).unwrap_or_else(|| f.ts().to_vec());
    let sf = smooth_points(f, model, &ts, reps, streams)?;
    let prop: Vec<f64> = if f.stderr().is_some() {
        let prop_at = |ws: &[f64], t: f64| -> f64 {
            let pos: Vec<f64> = ws.iter().copied().filter(|&w| w > 0.0).collect();
            (0..pos.len())
                .map(|j| {
                    let others: f64 = pos.iter().enumerate().filter(|(i, _)| *i != j).map(|(_, &w)| f.eval(t * w)).product();
                    f.stderr_at(t * pos[j]) * others
                })
                .sum()
        };
        match model.finite_support() {
            Some(rows) => ts.iter().map(|&t| rows.iter().map(|(ws, _, p)| p * prop_at(ws, t)).sum()).collect(),
            None => {
                let seqs = weights::sample_sequences(model, reps.clamp(1, 10_000), &streams.sub("propagation"));
                ts.iter()
                    .map(|&t| seqs.iter().map(|ws| prop_at(ws, t)).sum::<f64>() / seqs.len() as f64)
                    .collect()
            }
        }
    } else {
        vec![0.0; ts.len()]
    };
    let rows: Vec<ResidualRow> = ts
        .iter()
        .zip(&sf)
        .zip(&prop)
        .map(|((&t, s), &p)| {
            let fv = f.eval(t);
            let own = f.stderr_at(t) + p;
            let se = (s.stderr * s.stderr + own * own).sqrt();
            let diff = fv - s.mean;
            ResidualRow { t, f: fv, sf: s.mean, diff, stderr: se, z: z_score(diff, se, 1.0) }
        })
        .collect();
    let sup = rows.iter().map(|r| r.diff.abs()).fold(0.0, f64::max);
    let max_abs_z = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    Ok(ResidualReport { rows, sup, max_abs_z })
}

/// Positive modulation `h` with `t^alpha h(t)` nondecreasing.
#[derive(Debug, Clone, PartialEq)]
pub enum Modulation {
    Constant { c: f64, alpha: f64 },
    /// Multiplicatively `r`-periodic `h`, tabulated at `r^(k / K)`,
    /// `k = 0..K`, and interpolated linearly in `log t` with wrap-around.
    Periodic { r: f64, alpha: f64, table: Vec<f64> },
}

/// Table size used by [`Modulation::periodic_from_fn`].
pub const PERIOD_TABLE: usize = 1024;

impl Modulation {
    pub fn constant(c: f64, alpha: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidArgument("constant modulation needs c > 0 and alpha > 0".into()));
        }
        Ok(Modulation::Constant { c, alpha })
    }

    pub fn periodic(r: f64, alpha: f64, table: Vec<f64>) -> Result<Self> {
        if !(r > 1.0 && alpha > 0.0) || table.is_empty() || table.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidArgument("periodic modulation needs r > 1, alpha > 0 and positive table values".into()));
        }
        Ok(Modulation::Periodic { r, alpha, table })
    }

    /// Tabulates `h` over one period `[1, r)`.
    pub fn periodic_from_fn<F: Fn(f64) -> f64>(r: f64, alpha: f64, h: F) -> Result<Self> {
        let table = (0..PERIOD_TABLE).map(|k| h(r.powf(k as f64 / PERIOD_TABLE as f64))).collect();
        Self::periodic(r, alpha, table)
    }

    /// `h(t) = exp(eps sin(2 pi log_r t))`.
    pub fn sine(r: f64, alpha: f64, eps: f64) -> Result<Self> {
        Self::periodic_from_fn(r, alpha, |t| (eps * (2.0 * PI * t.ln() / r.ln()).sin()).exp())
    }

    pub fn alpha(&self) -> f64 {
        match self {
            Modulation::Constant { alpha, .. } | Modulation::Periodic { alpha, .. } => *alpha,
        }
    }

    /// Period (`1` for constants).
    pub fn period(&self) -> f64 {
        match self {
            Modulation::Constant { .. } => 1.0,
            Modulation::Periodic { r, .. } => *r,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Modulation::Constant { c, .. } => *c,
            Modulation::Periodic { r, table, .. } => {
                let u = t.ln() / r.ln();
                let u = u - u.floor();
                let x = u * table.len() as f64;
                let k = (x.floor() as usize).min(table.len() - 1);
                let w = x - k as f64;
                let next = table[(k + 1) % table.len()];
                table[k] + w * (next - table[k])
            }
        }
    }

    /// Discrete check that `t^alpha h(t)` is nondecreasing over one period,
    /// including the wrap from the last table point to `r`.
    pub fn is_admissible(&self) -> bool {
        match self {
            Modulation::Constant { .. } => true,
            Modulation::Periodic { r, alpha, table } => {
                let k = table.len();
                let phi = |i: usize| r.powf(i as f64 / k as f64).powf(*alpha) * table[i % k];
                (0..k).all(|i| phi(i + 1) >= phi(i) * (1.0 - 1e-12))
            }
        }
    }

    /// Signs of the finite differences `(-1)^(k+1) Delta_d^k phi(t) >= 0` for
    /// `phi(t) = t^alpha h(t)`, orders `k = 1..=4`, at the points `ts` with
    /// additive step `d`. These are necessary conditions for `phi` to have a
    /// completely monotone derivative.
    pub fn bernstein_differences(&self, ts: &[f64], d: f64) -> [bool; 4] {
        let phi = |t: f64| t.powf(self.alpha()) * self.eval(t);
        let mut ok = [true; 4];
        for &t in ts {
            let p: Vec<f64> = (0..=4).map(|i| phi(t + i as f64 * d)).collect();
            for k in 1..=4 {
                let mut diff = 0.0;
                let mut binom = 1.0;
                for i in 0..=k {
                    let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
                    diff += sign * binom * p[i];
                    binom = binom * (k - i) as f64 / (i + 1) as f64;
                }
                let signed = if k % 2 == 1 { diff } else { -diff };
                let scale = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if signed < -1e-12 * scale.max(1.0) {
                    ok[k - 1] = false;
                }
            }
        }
        ok
    }
}

/// Which martingale limit a sample approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    Additive,
    Derivative,
}

/// Replicate values of `W_n` or `Z_n`, standing in for the limits.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleLimitSamples {
    pub kind: LimitKind,
    pub samples: Vec<f64>,
    pub alpha: f64,
    pub generation: usize,
    /// Negative values replaced by zero.
    pub clamped: usize,
}

impl MartingaleLimitSamples {
    /// Samples from given values (e.g. an exactly known limit).
    pub fn from_values(kind: LimitKind, alpha: f64, generation: usize, samples: Vec<f64>) -> Self {
        MartingaleLimitSamples { kind, samples, alpha, generation, clamped: 0 }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn check_kind(model: &WeightModel, alpha: f64, kind: LimitKind) -> Result<()> {
    if let Some(d) = model.closed_log_moment(alpha, 1) {
        let c = weights::classify_derivative(&SummaryStats::exact(d), DEFAULT_RESOLUTION);
        let ok = match kind {
            LimitKind::Additive => c == Classification::Regular,
            LimitKind::Derivative => c == Classification::Boundary,
        };
        if !ok {
            return Err(Error::ClassificationMismatch);
        }
    }
    Ok(())
}

/// `W_n` over `reps` independent trees. With `floor > 0` small contributions
/// are thinned by unbiased roulette (see [`brw::sweep`]).
pub fn sample_w(model: &WeightModel, alpha: f64, n: usize, reps: usize, pop_cap: usize, floor: f64, streams: &Streams) -> Result<MartingaleLimitSamples> {
    check_kind(model, alpha, LimitKind::Additive)?;
    sample_w_unchecked(model, alpha, n, reps, pop_cap, floor, streams)
}

/// [`sample_w`] without the classification check; used to watch `W_n`
/// degenerate in the boundary case.
pub fn sample_w_unchecked(model: &WeightModel, alpha: f64, n: usize, reps: usize, pop_cap: usize, floor: f64, streams: &Streams) -> Result<MartingaleLimitSamples> {
    if reps == 0 {
        return Err(Error::EmptySamples);
    }
    let cfg = brw::SweepConfig { alpha, generations: n, pop_cap, floor };
    let samples = replicate::try_map(reps, |i| Ok(brw::sweep(model, &cfg, &mut streams.rng(i as u64))?.w[n]))?;
    Ok(MartingaleLimitSamples { kind: LimitKind::Additive, samples, alpha, generation: n, clamped: 0 })
}

/// `Z_n` over `reps` independent trees, each traversed depth first without
/// thinning. Negative values are clamped to zero and counted.
pub fn sample_z(model: &WeightModel, alpha: f64, n: usize, reps: usize, streams: &Streams) -> Result<MartingaleLimitSamples> {
    check_kind(model, alpha, LimitKind::Derivative)?;
    if reps == 0 {
        return Err(Error::EmptySamples);
    }
    let raw = replicate::map(reps, |i| brw::depth_first_totals(model, alpha, n, &mut streams.rng(i as u64)).1);
    let clamped = raw.iter().filter(|&&z| z < 0.0).count();
    let samples = raw.into_iter().map(|z| z.max(0.0)).collect();
    Ok(MartingaleLimitSamples { kind: LimitKind::Derivative, samples, alpha, generation: n, clamped })
}

/// `f(t) = mean_k exp(-h(t) t^alpha X_k)` on `grid`, with per-point standard
/// errors and the self-similar extension below the grid.
pub fn build_solution(h: &Modulation, samples: &MartingaleLimitSamples, grid: &[f64]) -> Result<GridFunction> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let alpha = h.alpha();
    let pts = replicate::try_map(grid.len(), |i| {
        let t = grid[i];
        let s = h.eval(t) * t.powf(alpha);
        let v: Vec<f64> = samples.samples.iter().map(|&x| (-s * x).exp()).collect();
        mean_ci(&v, DEFAULT_LEVEL)
    })?;
    let raw: Vec<f64> = pts.iter().map(|p| p.mean).collect();
    let lower = LowerTail::SelfSimilar { alpha, period: h.period() };
    let (f, _) = GridFunction::rearranged(grid.to_vec(), &raw, lower)?;
    let kind = match samples.kind {
        LimitKind::Additive => "W",
        LimitKind::Derivative => "Z",
    };
    Ok(f.with_stderr(pts.iter().map(|p| p.stderr).collect())?
        .with_alpha(alpha)
        .with_provenance(format!("solution from {} samples of {kind}_{}", samples.len(), samples.generation)))
}

/// Recovered modulation with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationFit {
    pub modulation: Modulation,
    /// `(t, -log f(t) / t^alpha)` at grid points with `0 < f(t) < 1`.
    pub h_hat: Vec<(f64, f64)>,
    /// `max |h_hat / median - 1|`.
    pub constancy: f64,
    /// `max |h_hat(r t) - h_hat(t)| / median` over the overlapping grid.
    pub periodicity: f64,
    /// `t^alpha h_hat(t)` nondecreasing on the grid.
    pub monotone: bool,
}

/// Points with `-log f` well resolved in floating point.
const FIT_LOW: f64 = 1e-6;
const FIT_HIGH: f64 = 1.0 - 1e-9;

/// Extracts `h_hat(t) = -log f(t) / t^alpha` and tests it for constancy
/// (`r = 1`) or `r`-periodicity.
pub fn fit_modulation(f: &GridFunction, alpha: f64, r: f64) -> Result<ModulationFit> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    let h_hat: Vec<(f64, f64)> = f
        .ts()
        .iter()
        .zip(f.values())
        .filter(|(_, &v)| v > FIT_LOW && v < FIT_HIGH)
        .map(|(&t, &v)| (t, -(v.ln()) / t.powf(alpha)))
        .collect();
    if h_hat.is_empty() {
        return Err(Error::DegenerateInput("no grid value strictly inside (0, 1)"));
    }
    let hs: Vec<f64> = h_hat.iter().map(|p| p.1).collect();
    let med = median(&hs);
    let constancy = hs.iter().map(|h| (h / med - 1.0).abs()).fold(0.0, f64::max);
    let monotone = h_hat.windows(2).all(|w| w[1].0.powf(alpha) * w[1].1 >= w[0].0.powf(alpha) * w[0].1 * (1.0 - 1e-12));
    let lin = |t: f64| -> Option<f64> {
        let k = h_hat.partition_point(|p| p.0 <= t);
        if k == 0 || k >= h_hat.len() {
            return if k > 0 && h_hat[k - 1].0 == t { Some(h_hat[k - 1].1) } else { None };
        }
        let (t0, h0) = h_hat[k - 1];
        let (t1, h1) = h_hat[k];
        let w = (t.ln() - t0.ln()) / (t1.ln() - t0.ln());
        Some(h0 + w * (h1 - h0))
    };
    let (modulation, periodicity) = if r > 1.0 {
        let per = h_hat
            .iter()
            .filter_map(|&(t, h)| lin(t * r).map(|h2| (h2 - h).abs() / med))
            .fold(0.0, f64::max);
        // One period starting at a power of r near the middle of the usable range.
        let mid = (h_hat[0].0.ln() + h_hat[h_hat.len() - 1].0.ln()) / 2.0;
        let m = (mid / r.ln() - 0.5).round();
        let base = r.powf(m);
        let table: Vec<f64> = (0..PERIOD_TABLE)
            .map(|k| {
                let t = base * r.powf(k as f64 / PERIOD_TABLE as f64);
                lin(t).unwrap_or(med)
            })
            .collect();
        (Modulation::periodic(r, alpha, table)?, per)
    } else {
        (Modulation::constant(med, alpha)?, constancy)
    };
    Ok(ModulationFit { modulation, h_hat, constancy, periodicity, monotone })
}

/// Estimate of `F(t) = E(-log M_n(t))` or of its truncated variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FEstimate {
    pub t: f64,
    pub stats: SummaryStats,
    /// Replicates with `M = 0` exactly, excluded from `stats`.
    pub infinite: usize,
    /// `F(t) / t^alpha`, or `F^(a)(t) / (t^alpha H(-log(t / a)))` when truncated.
    pub ratio: f64,
}

/// Truncation parameters of [`estimate_f`]: level `a` and harmonic function.
pub struct Truncation<'a> {
    pub a: f64,
    pub h: &'a (dyn Fn(f64) -> f64 + Sync),
}

/// Mean over `reps` trees of `-log M_n(t)` (or `-log M_n^(a)(t)`).
#[allow(clippy::too_many_arguments)]
pub fn estimate_f(
    model: &WeightModel,
    f: &GridFunction,
    alpha: f64,
    t: f64,
    n: usize,
    reps: usize,
    pop_cap: usize,
    trunc: Option<Truncation<'_>>,
    streams: &Streams,
) -> Result<FEstimate> {
    if reps == 0 {
        return Err(Error::EmptySamples);
    }
    let a = trunc.as_ref().map(|tr| tr.a).unwrap_or(f64::INFINITY);
    let vals = replicate::try_map(reps, |i| {
        let tree = brw::grow(model, n, pop_cap, &mut streams.rng(i as u64))?;
        let m = brw::truncated_m(&tree, |x| f.eval(x), t, a, n)?;
        Ok(if m > 0.0 { Some(-(m.ln())) } else { None })
    })?;
    let kept: Vec<f64> = vals.iter().flatten().copied().collect();
    let stats = mean_ci(&kept, DEFAULT_LEVEL)?;
    let denom = match &trunc {
        None => t.powf(alpha),
        Some(tr) => t.powf(alpha) * (tr.h)(-(t / tr.a).ln()),
    };
    Ok(FEstimate { t, stats, infinite: reps - kept.len(), ratio: stats.mean / denom })
}

/// `sup_{t <= 1} -log f(t) / t^alpha` over grid points.
pub fn tameness_ratio(f: &GridFunction, alpha: f64) -> Result<f64> {
    let mut any = false;
    let mut sup = 0.0f64;
    for (&t, &v) in f.ts().iter().zip(f.values()) {
        if t <= 1.0 {
            any = true;
            sup = sup.max(-(v.ln()) / t.powf(alpha));
        }
    }
    if any { Ok(sup) } else { Err(Error::DegenerateGrid) }
}

/// `sup_{t < 1} -log f(t) / (t^alpha (-log t))` over grid points.
pub fn boundary_tameness_ratio(f: &GridFunction, alpha: f64) -> Result<f64> {
    let mut any = false;
    let mut sup = 0.0f64;
    for (&t, &v) in f.ts().iter().zip(f.values()) {
        if t < 1.0 {
            any = true;
            sup = sup.max(-(v.ln()) / (t.powf(alpha) * -(t.ln())));
        }
    }
    if any { Ok(sup) } else { Err(Error::DegenerateGrid) }
}

/// Significance level of the distributional fixed-point checks.
pub const KS_LEVEL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SfpeReport {
    pub ks: KsReport,
    pub pass: bool,
    /// Right-hand draws equal to `+inf` (empty weight sequences in the
    /// min-type equation), excluded from the KS comparison.
    pub infinite: usize,
    pub reps: usize,
}

fn sfpe<X, C>(x_sampler: X, model: &WeightModel, reps: usize, combine: C, streams: &Streams) -> Result<SfpeReport>
where
    X: Fn(&mut Rng64) -> f64 + Sync + Send,
    C: Fn(&[f64], &[f64]) -> f64 + Sync + Send,
{
    if reps == 0 {
        return Err(Error::EmptySamples);
    }
    let left_s = streams.sub("left");
    let right_s = streams.sub("right");
    let left = replicate::map(reps, |i| x_sampler(&mut left_s.rng(i as u64)));
    let right = replicate::map(reps, |i| {
        let mut rng = right_s.rng(i as u64);
        let mut ws = Vec::new();
        model.fill(&mut rng, &mut ws);
        let xs: Vec<f64> = ws.iter().map(|_| x_sampler(&mut rng)).collect();
        combine(&ws, &xs)
    });
    let finite: Vec<f64> = right.iter().copied().filter(|v| v.is_finite()).collect();
    let infinite = reps - finite.len();
    let ks = ks_two_sample(&left, &finite, KS_LEVEL)?;
    Ok(SfpeReport { pass: ks.passes(), ks, infinite, reps })
}

/// KS comparison of `X` with `sum_j T_j X_j` (fresh copies each draw).
pub fn verify_additive_sfpe<X>(x_sampler: X, model: &WeightModel, reps: usize, streams: &Streams) -> Result<SfpeReport>
where
    X: Fn(&mut Rng64) -> f64 + Sync + Send,
{
    sfpe(x_sampler, model, reps, |ws, xs| ws.iter().zip(xs).map(|(w, x)| w * x).sum(), streams)
}

/// KS comparison of `X` with `inf { X_j / T_j : T_j > 0 }` (`+inf` when no
/// weight is positive).
pub fn verify_min_sfpe<X>(x_sampler: X, model: &WeightModel, reps: usize, streams: &Streams) -> Result<SfpeReport>
where
    X: Fn(&mut Rng64) -> f64 + Sync + Send,
{
    sfpe(
        x_sampler,
        model,
        reps,
        |ws, xs| {
            ws.iter()
                .zip(xs)
                .filter(|(w, _)| **w > 0.0)
                .map(|(w, x)| x / w)
                .fold(f64::INFINITY, f64::min)
        },
        streams,
    )
}

/// `1 / (2 N^2)` with `N` standard normal: the one-sided stable law of index
/// one half with Laplace transform `exp(-sqrt(t))`.
pub fn half_stable<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let n: f64 = rng.sample(rand_distr::StandardNormal);
    1.0 / (2.0 * n * n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;

    fn dyadic() -> WeightModel {
        WeightModel::deterministic(&[0.5, 0.5]).unwrap()
    }

    fn quarter() -> WeightModel {
        WeightModel::deterministic(&[0.25, 0.25]).unwrap()
    }

    fn exp_fn(alpha: f64) -> GridFunction {
        GridFunction::from_fn(default_grid(), |t| (-t.powf(alpha)).exp(), LowerTail::SelfSimilar { alpha, period: 1.0 }).unwrap()
    }

    #[test]
    fn default_grid_is_dyadic() {
        let g = default_grid();
        assert_eq!(g.len(), 512);
        assert_eq!(g[0], 1e-4);
        assert!((g[511] - 980.0).abs() < 5.0);
        assert!((g[22] / g[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn evaluation_contract() {
        let f = GridFunction::new(vec![1.0, 2.0, 4.0], vec![0.9, 0.5, 0.1], LowerTail::One).unwrap();
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(10.0), 0.1);
        assert_eq!(f.eval(2.0), 0.5);
        assert!((f.eval(2f64.sqrt()) - 0.7).abs() < 1e-12);
        assert!((f.lower_bias_bound() - 0.1).abs() < 1e-15);
        assert!(GridFunction::new(vec![1.0, 2.0], vec![0.5, 0.6], LowerTail::One).is_err());
        assert!(GridFunction::new(vec![1.0, 2.0], vec![1.5, 0.6], LowerTail::One).is_err());
        let h = f.clone().with_lower(LowerTail::Hold);
        assert_eq!(h.eval(0.1), 0.9);
    }

    #[test]
    fn self_similar_extension() {
        let f = exp_fn(1.0);
        assert!((f.eval(1e-6) - (-1e-6f64).exp()).abs() < 1e-15);
        let m = Modulation::sine(2.0, 1.0, 0.05).unwrap();
        let w = MartingaleLimitSamples::from_values(LimitKind::Additive, 1.0, 0, vec![1.0]);
        let g = build_solution(&m, &w, &default_grid()).unwrap();
        for &t in &[3e-5, 1e-5, 7.7e-7] {
            let exact = (-m.eval(t) * t).exp();
            assert!((g.eval(t).ln() / exact.ln() - 1.0).abs() < 1e-3, "{t}");
            let up = g.eval(2.0 * t).powf(0.5);
            assert!((g.eval(t) - up).abs() < 1e-15, "{t}");
        }
    }

    #[test]
    fn exact_fixed_points() {
        let s = Streams::new(0);
        let r = residual(&exp_fn(1.0), &dyadic(), 1, None, &s).unwrap();
        assert!(r.sup < 1e-6, "{}", r.sup);
        let r = residual(&exp_fn(0.5), &quarter(), 1, None, &s).unwrap();
        assert!(r.sup < 1e-6, "{}", r.sup);
        let one = GridFunction::from_fn(default_grid(), |_| 1.0, LowerTail::One).unwrap();
        let r = residual(&one, &dyadic(), 1, None, &s).unwrap();
        assert_eq!(r.sup, 0.0);
    }

    #[test]
    fn periodic_modulation_is_a_dyadic_fixed_point() {
        let s = Streams::new(0);
        let m = Modulation::sine(2.0, 1.0, 0.05).unwrap();
        assert!(m.is_admissible());
        let w = MartingaleLimitSamples::from_values(LimitKind::Additive, 1.0, 0, vec![1.0]);
        let f = build_solution(&m, &w, &default_grid()).unwrap();
        let r = residual(&f, &dyadic(), 1, None, &s).unwrap();
        assert!(r.sup < 1e-6, "{}", r.sup);
    }

    #[test]
    fn smoothing_is_deterministic_for_fixed_models() {
        let f = GridFunction::from_fn(default_grid(), |t| 1.0 / (1.0 + t), LowerTail::One).unwrap();
        let a = apply_smoothing(&f, &dyadic(), 1, &Streams::new(1)).unwrap();
        let b = apply_smoothing(&f, &dyadic(), 1000, &Streams::new(2)).unwrap();
        assert_eq!(a, b);
        assert!(a.adjustment < 1e-12);
    }

    #[test]
    fn trivial_solutions_are_invariant() {
        let s = Streams::new(0);
        for (model, q) in [(dyadic(), 0.0), (WeightModel::deterministic(&[]).unwrap(), 1.0)] {
            let f = GridFunction::from_fn(default_grid(), |_| q, LowerTail::Hold).unwrap();
            let g = apply_smoothing(&f, &model, 1, &s).unwrap().f;
            assert_eq!(g.values(), f.values());
        }
        let model = WeightModel::tabulated(vec![(vec![], 0.5), (vec![0.4, 0.4, 0.4], 0.5)]).unwrap();
        let q = (5f64.sqrt() - 1.0) / 2.0;
        let f = GridFunction::from_fn(default_grid(), |_| q, LowerTail::Hold).unwrap();
        let g = apply_smoothing(&f, &model, 1, &s).unwrap().f;
        assert!(g.values().iter().all(|v| (v - q).abs() < 1e-12));
    }

    #[test]
    fn iteration_from_a_fixed_point_stays_put() {
        let (traj, _) = iterate(&exp_fn(1.0), &dyadic(), 3, 1, &Streams::new(0)).unwrap();
        assert!(traj.iter().all(|(_, r)| *r < 1e-6));
        let g = GridFunction::from_fn(default_grid(), |t| (-t * t).exp(), LowerTail::SelfSimilar { alpha: 2.0, period: 1.0 }).unwrap();
        let (traj, last) = iterate(&g, &dyadic(), 5, 1, &Streams::new(0)).unwrap();
        assert_eq!(traj.len(), 5);
        assert!(fit_power_scale(&last, 1.0).is_some());
    }

    #[test]
    fn solutions_from_constant_samples() {
        let w = MartingaleLimitSamples::from_values(LimitKind::Additive, 1.0, 0, vec![1.0; 8]);
        let f = build_solution(&Modulation::constant(1.0, 1.0).unwrap(), &w, &default_grid()).unwrap();
        for (&t, &v) in f.ts().iter().zip(f.values()) {
            assert!((v - (-t).exp()).abs() < 1e-15);
        }
        let g = build_solution(&Modulation::constant(1.0, 0.5).unwrap(), &w, &default_grid()).unwrap();
        for (&t, &v) in g.ts().iter().zip(g.values()) {
            assert!((v - (-t.sqrt()).exp()).abs() < 1e-15);
        }
        let e = MartingaleLimitSamples::from_values(LimitKind::Additive, 1.0, 0, vec![]);
        assert!(matches!(build_solution(&Modulation::constant(1.0, 1.0).unwrap(), &e, &default_grid()), Err(Error::EmptySamples)));
    }

    #[test]
    fn modulation_fits() {
        let fit = fit_modulation(&exp_fn(1.0), 1.0, 1.0).unwrap();
        assert!(fit.constancy < 1e-6, "{}", fit.constancy);
        assert!(matches!(fit.modulation, Modulation::Constant { c, .. } if (c - 1.0).abs() < 1e-9));

        let m = Modulation::sine(2.0, 1.0, 0.05).unwrap();
        let w = MartingaleLimitSamples::from_values(LimitKind::Additive, 1.0, 0, vec![1.0]);
        let f = build_solution(&m, &w, &default_grid()).unwrap();
        let fit = fit_modulation(&f, 1.0, 2.0).unwrap();
        assert!(fit.periodicity < 1e-3, "{}", fit.periodicity);
        assert!(fit.monotone);
        for k in 0..50 {
            let t = 0.05 * 1.1f64.powi(k);
            assert!((fit.modulation.eval(t) - m.eval(t)).abs() < 1e-3, "{t}");
        }

        let sq = GridFunction::from_fn(default_grid(), |t| (-t * t).exp(), LowerTail::One).unwrap();
        let fit = fit_modulation(&sq, 1.0, 1.0).unwrap();
        assert!(fit.constancy > 10.0);
        let one = GridFunction::from_fn(default_grid(), |_| 1.0, LowerTail::One).unwrap();
        assert!(matches!(fit_modulation(&one, 1.0, 1.0), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn tameness_of_exact_solutions() {
        assert!((tameness_ratio(&exp_fn(1.0), 1.0).unwrap() - 1.0).abs() < 1e-9);
        assert!((tameness_ratio(&exp_fn(0.5), 0.5).unwrap() - 1.0).abs() < 1e-9);
        let g = GridFunction::from_fn(log_grid(1e-3, 0.3, 200), |t| (-t * -(t.ln())).exp(), LowerTail::One).unwrap();
        assert!((boundary_tameness_ratio(&g, 1.0).unwrap() - 1.0).abs() < 1e-9);
        let hi = GridFunction::from_fn(vec![2.0, 3.0], |_| 0.5, LowerTail::One).unwrap();
        assert!(matches!(tameness_ratio(&hi, 1.0), Err(Error::DegenerateGrid)));
    }

    #[test]
    fn estimated_f_of_the_exponential() {
        let f = exp_fn(1.0);
        let s = Streams::new(0);
        // Grid points whose 2^-6 multiples are also grid points.
        for k in [250, 300, 350] {
            let t = f.ts()[k];
            let e = estimate_f(&dyadic(), &f, 1.0, t, 6, 3, 1 << 10, None, &s).unwrap();
            assert!((e.stats.mean - t).abs() < 1e-9 * t.max(1.0));
            assert!((e.ratio - 1.0).abs() < 1e-9);
        }
        let one = GridFunction::from_fn(default_grid(), |_| 1.0, LowerTail::One).unwrap();
        assert_eq!(estimate_f(&dyadic(), &one, 1.0, 2.0, 3, 2, 100, None, &s).unwrap().stats.mean, 0.0);
    }

    #[test]
    fn distributional_checks() {
        let s = Streams::new(1);
        let r = verify_additive_sfpe(|_| 1.0, &dyadic(), 1000, &s).unwrap();
        assert_eq!(r.ks.statistic, 0.0);
        assert!(r.pass);
        let r = verify_additive_sfpe(|rng| half_stable(rng), &quarter(), 20_000, &s).unwrap();
        assert!(r.pass, "{:?}", r.ks);
        let r = verify_additive_sfpe(|_| 1.0, &WeightModel::deterministic(&[0.6, 0.3]).unwrap(), 1000, &s).unwrap();
        assert!(!r.pass);
        let exp = |rng: &mut Rng64| -> f64 { -(1.0 - rng.random::<f64>()).ln() / 2.0 };
        assert!(verify_min_sfpe(exp, &dyadic(), 20_000, &s).unwrap().pass);
        assert!(!verify_min_sfpe(|_| 1.0, &dyadic(), 1000, &s).unwrap().pass);
        let with_empty = WeightModel::tabulated(vec![(vec![], 0.3), (vec![0.5, 0.5], 0.7)]).unwrap();
        let r = verify_min_sfpe(exp, &with_empty, 20_000, &s).unwrap();
        assert!(r.pass);
        let p = r.infinite as f64 / r.reps as f64;
        assert!((p - 0.3).abs() < 4.0 * (0.3f64 * 0.7 / 20_000.0).sqrt(), "{p}");
    }

    #[test]
    fn stable_half_laplace_transform() {
        // Oracle: E exp(-t / (2 N^2)) by midpoint quadrature against the normal density.
        let t = 1.3f64;
        let n = 400_000;
        let (lo, hi) = (1e-6f64, 12.0f64);
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for k in 0..n {
            let x = lo + (k as f64 + 0.5) * h;
            acc += (-t / (2.0 * x * x)).exp() * (-x * x / 2.0).exp();
        }
        let integral = 2.0 * acc * h / (2.0 * PI).sqrt();
        assert!((integral - (-t.sqrt()).exp()).abs() < 1e-6, "{integral}");
    }

    #[test]
    fn w_samples_of_deterministic_models() {
        let s = Streams::new(0);
        let w = sample_w(&dyadic(), 1.0, 8, 5, 1 << 10, 0.0, &s).unwrap();
        assert!(w.samples.iter().all(|&x| x == 1.0));
        let w = sample_w(&quarter(), 0.5, 8, 5, 1 << 10, 0.0, &s).unwrap();
        assert!(w.samples.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let b = WeightModel::gaussian_binary(2.0 * LN_2, 2.0 * LN_2).unwrap();
        assert!(matches!(sample_w(&b, 1.0, 3, 5, 100, 0.0, &s), Err(Error::ClassificationMismatch)));
        assert!(matches!(sample_z(&dyadic(), 1.0, 3, 5, &s), Err(Error::ClassificationMismatch)));
    }

    #[test]
    fn bernstein_conditions() {
        let c = Modulation::constant(1.0, 0.5).unwrap();
        let ts: Vec<f64> = (1..50).map(|k| 0.1 * k as f64).collect();
        assert_eq!(c.bernstein_differences(&ts, 0.05), [true; 4]);
        let steep = Modulation::constant(1.0, 1.5).unwrap();
        assert!(!steep.bernstein_differences(&ts, 0.05)[1]);
    }
}
