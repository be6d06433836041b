//! The random walk associated with the weights through the many-to-one
//! identity, its killed harmonic functions and ladder quantities.
//!
//! Increments have law `P(S_1 in B) = E sum_j T_j^alpha 1{-log T_j in B}`.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::brw::{self, LineMember};
use crate::error::{Error, Result};
use crate::replicate;
use crate::rng::Streams;
use crate::stats::{mean_ci, quantile, z_score, SummaryStats, DEFAULT_LEVEL};
use crate::weights::{sample_marginal, Family, Marginal, WeightModel};

/// Default cap on walk steps per replicate.
pub const DEFAULT_STEP_CAP: usize = 1_000_000;

/// Fraction of capped replicates above which an estimate is flagged.
pub const CAPPED_FLAG: f64 = 0.01;

/// Law of one increment of the walk.
#[derive(Debug, Clone, PartialEq)]
pub enum IncrementLaw {
    /// Finitely many atoms, sampled by inversion.
    Discrete { atoms: Vec<f64>, probs: Vec<f64>, cdf: Vec<f64> },
    /// Exact normal increments.
    Normal { mean: f64, sd: f64 },
    /// `-log U` with `U` drawn from `marginal` and accepted with probability
    /// `U^alpha / envelope`.
    Rejection { marginal: Marginal, alpha: f64, envelope: f64, mean: Option<f64> },
}

impl IncrementLaw {
    /// Atoms with probabilities. Equal atoms are merged; probabilities are
    /// normalized by their sum.
    pub fn discrete(atoms: &[f64], probs: &[f64]) -> Result<Self> {
        if atoms.len() != probs.len() || atoms.is_empty() {
            return Err(Error::InvalidArgument("atoms and probabilities must be nonempty and of equal length".into()));
        }
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for (&x, &p) in atoms.iter().zip(probs) {
            if !(x.is_finite() && p >= 0.0 && p.is_finite()) {
                return Err(Error::InvalidArgument("atoms must be finite and probabilities nonnegative".into()));
            }
            if p == 0.0 {
                continue;
            }
            match pairs.iter_mut().find(|(y, _)| *y == x) {
                Some(e) => e.1 += p,
                None => pairs.push((x, p)),
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|e| e.1).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("total mass must be positive".into()));
        }
        let atoms: Vec<f64> = pairs.iter().map(|e| e.0).collect();
        let probs: Vec<f64> = pairs.iter().map(|e| e.1 / total).collect();
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(IncrementLaw::Discrete { atoms, probs, cdf })
    }

    /// The simple symmetric walk on the integers.
    pub fn symmetric_pm1() -> Self {
        IncrementLaw::discrete(&[-1.0, 1.0], &[0.5, 0.5]).expect("valid law")
    }

    pub fn normal(mean: f64, variance: f64) -> Result<Self> {
        if !(mean.is_finite() && variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument("normal increments need finite mean and variance > 0".into()));
        }
        Ok(IncrementLaw::Normal { mean, sd: variance.sqrt() })
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            IncrementLaw::Discrete { atoms, probs, .. } => Some(atoms.iter().zip(probs).map(|(x, p)| x * p).sum()),
            IncrementLaw::Normal { mean, .. } => Some(*mean),
            IncrementLaw::Rejection { mean, .. } => *mean,
        }
    }

    pub fn variance(&self) -> Option<f64> {
        match self {
            IncrementLaw::Discrete { atoms, probs, .. } => {
                let m = self.mean()?;
                Some(atoms.iter().zip(probs).map(|(x, p)| p * (x - m) * (x - m)).sum())
            }
            IncrementLaw::Normal { sd, .. } => Some(sd * sd),
            IncrementLaw::Rejection { .. } => None,
        }
    }

    /// Name of the sampling strategy.
    pub fn strategy(&self) -> &'static str {
        match self {
            IncrementLaw::Discrete { .. } => "exact-discrete",
            IncrementLaw::Normal { .. } => "exact-normal",
            IncrementLaw::Rejection { .. } => "rejection",
        }
    }

    /// True when every increment is an integer.
    pub fn is_integer_valued(&self) -> bool {
        match self {
            IncrementLaw::Discrete { atoms, .. } => atoms.iter().all(|x| x.fract() == 0.0),
            _ => false,
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            IncrementLaw::Discrete { atoms, cdf, .. } => {
                if atoms.len() == 1 {
                    return atoms[0];
                }
                let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
                let k = cdf.iter().position(|&c| u < c).unwrap_or(atoms.len() - 1);
                atoms[k]
            }
            IncrementLaw::Normal { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            IncrementLaw::Rejection { marginal, alpha, envelope, .. } => loop {
                let u = sample_marginal(marginal, rng);
                if u > 0.0 && rng.random::<f64>() * envelope < u.powf(*alpha) {
                    return -(u.ln());
                }
            },
        }
    }

    /// Exact expectation of `g(S_1)` for discrete laws.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G) -> Option<f64> {
        match self {
            IncrementLaw::Discrete { atoms, probs, .. } => Some(atoms.iter().zip(probs).map(|(&x, &p)| p * g(x)).sum()),
            _ => None,
        }
    }
}

/// Increment law of the walk associated with `model` at `alpha`.
pub fn make_increment_law(model: &WeightModel, alpha: f64, tol: f64) -> Result<IncrementLaw> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument("alpha must be positive".into()));
    }
    let m = model.closed_moment(alpha).ok_or(Error::NoEnvelope)?;
    if (m - 1.0).abs() > tol {
        return Err(Error::NotNormalized { m });
    }
    if let Some(rows) = model.finite_support() {
        let mut atoms = Vec::new();
        let mut probs = Vec::new();
        for (ws, steps, p) in rows {
            for (&t, &s) in ws.iter().zip(steps) {
                if t > 0.0 && p > 0.0 {
                    atoms.push(s);
                    probs.push(p * t.powf(alpha));
                }
            }
        }
        return IncrementLaw::discrete(&atoms, &probs);
    }
    match model.family() {
        Family::GaussianBinary { mean, variance } => IncrementLaw::normal(mean - alpha * variance, *variance),
        Family::IidCount { marginal, .. } => match *marginal {
            Marginal::LogNormal { mu, sigma2 } => IncrementLaw::normal(-mu - alpha * sigma2, sigma2),
            Marginal::Uniform { hi, .. } => Ok(IncrementLaw::Rejection {
                marginal: marginal.clone(),
                alpha,
                envelope: hi.powf(alpha),
                mean: model.closed_log_moment(alpha, 1).map(|v| -v),
            }),
            Marginal::Beta { .. } => Ok(IncrementLaw::Rejection {
                marginal: marginal.clone(),
                alpha,
                envelope: 1.0,
                mean: None,
            }),
        },
        _ => Err(Error::NoEnvelope),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Entered `(-inf, a]`.
    Lower,
    /// Entered `(b, inf)`.
    Upper,
    StepCap,
}

/// A simulated walk `S_0 = x, S_1, ..., S_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkPath {
    pub start: f64,
    pub positions: Vec<f64>,
    pub stop: StopReason,
}

impl WalkPath {
    pub fn steps(&self) -> usize {
        self.positions.len() - 1
    }

    pub fn last(&self) -> f64 {
        *self.positions.last().expect("paths hold S_0")
    }
}

/// Runs the walk from `x` until it enters `(-inf, a]` or `(b, inf)`.
pub fn simulate_until<R: Rng + ?Sized>(
    law: &IncrementLaw,
    x: f64,
    a: f64,
    b: f64,
    step_cap: usize,
    rng: &mut R,
) -> Result<WalkPath> {
    let mut positions = vec![x];
    let mut s = x;
    loop {
        if s <= a {
            return Ok(WalkPath { start: x, positions, stop: StopReason::Lower });
        }
        if s > b {
            return Ok(WalkPath { start: x, positions, stop: StopReason::Upper });
        }
        if positions.len() > step_cap {
            return Err(Error::StepCapExceeded {
                cap: step_cap,
                partial: Some(alloc::boxed::Box::new(WalkPath { start: x, positions, stop: StopReason::StepCap })),
            });
        }
        s += law.sample(rng);
        positions.push(s);
    }
}

/// Final position and stop reason, without storing the path.
#[inline]
fn run_to_exit<R: Rng + ?Sized>(law: &IncrementLaw, x: f64, a: f64, b: f64, cap: usize, rng: &mut R) -> (f64, StopReason) {
    let mut s = x;
    for _ in 0..=cap {
        if s <= a {
            return (s, StopReason::Lower);
        }
        if s > b {
            return (s, StopReason::Upper);
        }
        s += law.sample(rng);
    }
    (s, StopReason::StepCap)
}

/// A Monte Carlo walk estimate with capped-replicate accounting. Capped
/// replicates are excluded from `stats`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkEstimate {
    pub x: f64,
    pub stats: SummaryStats,
    pub reps: usize,
    pub capped: usize,
}

impl WalkEstimate {
    fn exact(x: f64, v: f64, reps: usize) -> Self {
        WalkEstimate { x, stats: SummaryStats::exact(v), reps, capped: 0 }
    }

    pub fn capped_fraction(&self) -> f64 {
        if self.reps == 0 {
            0.0
        } else {
            self.capped as f64 / self.reps as f64
        }
    }

    pub fn flagged(&self) -> bool {
        self.capped_fraction() > CAPPED_FLAG
    }
}

fn collect(x: f64, reps: usize, samples: Vec<Option<f64>>) -> Result<WalkEstimate> {
    let kept: Vec<f64> = samples.iter().flatten().copied().collect();
    let capped = reps - kept.len();
    Ok(WalkEstimate { x, stats: mean_ci(&kept, DEFAULT_LEVEL)?, reps, capped })
}

fn check_reps(reps: usize) -> Result<()> {
    if reps == 0 {
        Err(Error::InvalidArgument("reps must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Renewal-type harmonic function `H^(x)`: the expected number of `k >= 0`
/// with `S_k in (0, x]` before the first `n >= 1` with `S_n >= x`, for the
/// walk started at `x`.
pub fn tanaka_h_hat(law: &IncrementLaw, x: f64, reps: usize, step_cap: usize, streams: &Streams) -> Result<WalkEstimate> {
    check_reps(reps)?;
    if x <= 0.0 {
        return Ok(WalkEstimate::exact(x, 0.0, reps));
    }
    let samples = replicate::map(reps, |i| {
        let mut rng = streams.rng(i as u64);
        let mut s = x;
        let mut count = 1u64;
        for _ in 0..step_cap {
            s += law.sample(&mut rng);
            if s >= x {
                return Some(count as f64);
            }
            if s > 0.0 {
                count += 1;
            }
        }
        None
    });
    collect(x, reps, samples)
}

/// `H(x) = x - E_x S_tau` with `tau` the first entrance into `(-inf, 0]`.
pub fn h_ladder(law: &IncrementLaw, x: f64, reps: usize, step_cap: usize, streams: &Streams) -> Result<WalkEstimate> {
    check_reps(reps)?;
    if x <= 0.0 {
        return Ok(WalkEstimate::exact(x, 0.0, reps));
    }
    let samples = replicate::map(reps, |i| {
        let mut rng = streams.rng(i as u64);
        match run_to_exit(law, x, 0.0, f64::INFINITY, step_cap, &mut rng) {
            (s, StopReason::Lower) => Some(x - s),
            _ => None,
        }
    });
    collect(x, reps, samples)
}

/// A tabulated harmonic function: zero on `(-inf, 0]`, monotone linear
/// interpolation on the table, slope one beyond it.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicTable {
    xs: Vec<f64>,
    hs: Vec<f64>,
}

/// Abscissa used for the right limit at zero.
pub const ZERO_PLUS: f64 = 1e-9;

impl HarmonicTable {
    /// Table from increasing positive abscissae and values. Values are
    /// replaced by their running maximum.
    pub fn from_values(xs: &[f64], hs: &[f64]) -> Result<Self> {
        if xs.is_empty() || xs.len() != hs.len() {
            return Err(Error::InvalidArgument("table needs matching nonempty abscissae and values".into()));
        }
        if xs[0] <= 0.0 || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("abscissae must be positive and increasing".into()));
        }
        let mut run = 0.0f64;
        let hs = hs
            .iter()
            .map(|&h| {
                run = run.max(h);
                run
            })
            .collect();
        Ok(HarmonicTable { xs: xs.to_vec(), hs })
    }

    /// `H(x) = x` on `(0, inf)`.
    pub fn identity() -> Self {
        HarmonicTable { xs: vec![ZERO_PLUS, 1.0], hs: vec![ZERO_PLUS, 1.0] }
    }

    /// Estimates `H` at `ZERO_PLUS` and each of `xs` by [`h_ladder`].
    pub fn from_ladder(law: &IncrementLaw, xs: &[f64], reps: usize, step_cap: usize, streams: &Streams) -> Result<Self> {
        let mut grid = vec![ZERO_PLUS];
        grid.extend(xs.iter().copied().filter(|&x| x > ZERO_PLUS));
        grid.sort_by(|a, b| a.total_cmp(b));
        grid.dedup();
        let mut hs = Vec::with_capacity(grid.len());
        for (k, &x) in grid.iter().enumerate() {
            hs.push(h_ladder(law, x, reps, step_cap, &streams.sub("ladder").sub(&alloc::format!("{k}")))?.stats.mean);
        }
        Self::from_values(&grid, &hs)
    }

    /// `H` for driftless normal increments with standard deviation `sd`,
    /// from the renewal equation of the undershoot
    /// `u(x) = E[x + X; x + X <= 0] + E[u(x + X); x + X > 0]` and
    /// `H(x) = x - u(x)`. `u` is piecewise linear on `cells` equal cells of
    /// `[0, upper]` and equal to its limit `-rho sd` above, where
    /// `rho = -zeta(1/2) / sqrt(2 pi)` is the mean limiting overshoot of a
    /// driftless normal walk.
    pub fn normal_quadrature(sd: f64, upper: f64, cells: usize) -> Result<Self> {
        if !(sd > 0.0 && upper > 0.0 && cells >= 2) {
            return Err(Error::InvalidArgument("quadrature needs sd > 0, upper > 0 and at least two cells".into()));
        }
        const ZETA_HALF: f64 = -1.460_354_508_809_586_8;
        let u_inf = ZETA_HALF / (2.0 * core::f64::consts::PI).sqrt() * sd;
        let n = cells + 1;
        let h = upper / cells as f64;
        let ys: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let cdf = |z: f64| 0.5 * libm::erfc(-z / core::f64::consts::SQRT_2);
        let dens = |z: f64| (-0.5 * (z / sd) * (z / sd)).exp() / (sd * (2.0 * core::f64::consts::PI).sqrt());
        // Row-major system (I - K) u = rhs.
        let mut m = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let x = ys[i];
            rhs[i] = x * cdf(-x / sd) - sd * sd * dens(x) + u_inf * (1.0 - cdf((upper - x) / sd));
            m[i * n + i] += 1.0;
            for j in 0..cells {
                let (a, b) = (ys[j], ys[j + 1]);
                let mass = cdf((b - x) / sd) - cdf((a - x) / sd);
                let first = x * mass + sd * sd * (dens(a - x) - dens(b - x));
                m[i * n + j] -= (b * mass - first) / h;
                m[i * n + j + 1] -= (first - a * mass) / h;
            }
        }
        // The system is strictly diagonally dominant, so elimination needs no pivoting.
        for k in 0..n {
            let piv = m[k * n + k];
            for i in k + 1..n {
                let f = m[i * n + k] / piv;
                if f != 0.0 {
                    for j in k..n {
                        m[i * n + j] -= f * m[k * n + j];
                    }
                    rhs[i] -= f * rhs[k];
                }
            }
        }
        let mut u = vec![0.0; n];
        for k in (0..n).rev() {
            let tail: f64 = (k + 1..n).map(|j| m[k * n + j] * u[j]).sum();
            u[k] = (rhs[k] - tail) / m[k * n + k];
        }
        let mut xs = Vec::with_capacity(n);
        xs.push(ZERO_PLUS);
        xs.extend_from_slice(&ys[1..]);
        let hs: Vec<f64> = xs.iter().zip(&u).map(|(&x, &v)| x - v).collect();
        Self::from_values(&xs, &hs)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.hs
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.hs[0];
        }
        if x >= self.xs[n - 1] {
            return self.hs[n - 1] + (x - self.xs[n - 1]);
        }
        let k = self.xs.partition_point(|&v| v <= x);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (h0, h1) = (self.hs[k - 1], self.hs[k]);
        h0 + (h1 - h0) * (x - x0) / (x1 - x0)
    }
}

/// One row of a harmonicity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicRow {
    pub x: f64,
    pub value: f64,
    pub expected: SummaryStats,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicReport {
    pub rows: Vec<HarmonicRow>,
    pub z_tol: f64,
    pub pass: bool,
}

/// Compares `G(x)` with `E G(x + S_1) 1{x + S_1 > 0}` at each `x`. Discrete
/// laws are evaluated exactly.
pub fn verify_harmonic<G>(law: &IncrementLaw, g: G, xs: &[f64], reps: usize, z_tol: f64, streams: &Streams) -> Result<HarmonicReport>
where
    G: Fn(f64) -> f64 + Sync + Send,
{
    let gk = |y: f64| if y > 0.0 { g(y) } else { 0.0 };
    let mut rows = Vec::with_capacity(xs.len());
    for (k, &x) in xs.iter().enumerate() {
        let value = g(x);
        let expected = match law.expect(|s| gk(x + s)) {
            Some(v) => SummaryStats::exact(v),
            None => {
                check_reps(reps)?;
                let sub = streams.sub(&alloc::format!("{k}"));
                let v = replicate::map(reps, |i| gk(x + law.sample(&mut sub.rng(i as u64))));
                mean_ci(&v, DEFAULT_LEVEL)?
            }
        };
        let z = z_score(value - expected.mean, expected.stderr, value);
        rows.push(HarmonicRow { x, value, expected, z });
    }
    let pass = rows.iter().all(|r| r.z.abs() < z_tol);
    Ok(HarmonicReport { rows, z_tol, pass })
}

/// Compares `G(x)` with `E_x G(S_sigma(y)) 1{sigma(y) < tau}` for `0 < x < y`.
pub fn verify_stopped_harmonic<G>(
    law: &IncrementLaw,
    g: G,
    x: f64,
    y: f64,
    reps: usize,
    step_cap: usize,
    streams: &Streams,
) -> Result<(HarmonicRow, WalkEstimate)>
where
    G: Fn(f64) -> f64 + Sync + Send,
{
    if !(0.0 < x && x < y) {
        return Err(Error::InvalidArgument("need 0 < x < y".into()));
    }
    check_reps(reps)?;
    let samples = replicate::map(reps, |i| {
        let mut rng = streams.rng(i as u64);
        match run_to_exit(law, x, 0.0, y, step_cap, &mut rng) {
            (s, StopReason::Upper) => Some(g(s)),
            (_, StopReason::Lower) => Some(0.0),
            _ => None,
        }
    });
    let est = collect(x, reps, samples)?;
    let value = g(x);
    let z = z_score(value - est.stats.mean, est.stats.stderr, value);
    Ok((HarmonicRow { x, value, expected: est.stats, z }, est))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OvershootReport {
    pub x: f64,
    pub a: f64,
    /// Law of `R_a = S_sigma(a) - a` for the unkilled walk.
    pub overshoot: SummaryStats,
    /// Minimum, quartiles and maximum of `R_a`.
    pub quantiles: [f64; 5],
    /// `E_x R_a 1{sigma(a) < tau}`.
    pub killed: SummaryStats,
    pub capped: usize,
    pub reps: usize,
}

/// Overshoot of level `a` for the walk started at `x`, free and killed.
pub fn overshoot_stats(law: &IncrementLaw, x: f64, a: f64, reps: usize, step_cap: usize, streams: &Streams) -> Result<OvershootReport> {
    check_reps(reps)?;
    let free = streams.sub("free");
    let killed = streams.sub("killed");
    let rs = replicate::map(reps, |i| match run_to_exit(law, x, f64::NEG_INFINITY, a, step_cap, &mut free.rng(i as u64)) {
        (s, StopReason::Upper) => Some(s - a),
        _ => None,
    });
    let ks = replicate::map(reps, |i| match run_to_exit(law, x, 0.0, a, step_cap, &mut killed.rng(i as u64)) {
        (s, StopReason::Upper) => Some(s - a),
        (_, StopReason::Lower) => Some(0.0),
        _ => None,
    });
    let mut r: Vec<f64> = rs.iter().flatten().copied().collect();
    let k: Vec<f64> = ks.iter().flatten().copied().collect();
    let capped = (reps - r.len()) + (reps - k.len());
    let overshoot = mean_ci(&r, DEFAULT_LEVEL)?;
    r.sort_by(|p, q| p.total_cmp(q));
    let quantiles = [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile(&r, q));
    Ok(OvershootReport {
        x,
        a,
        overshoot,
        quantiles,
        killed: mean_ci(&k, DEFAULT_LEVEL)?,
        capped,
        reps,
    })
}

/// `y P_x(sigma(y) < tau)` for each `y`, from one set of paths run until
/// they are killed or exceed the largest `y`.
pub fn limit_formula(law: &IncrementLaw, x: f64, ys: &[f64], reps: usize, step_cap: usize, streams: &Streams) -> Result<Vec<WalkEstimate>> {
    check_reps(reps)?;
    if x <= 0.0 {
        return Ok(ys.iter().map(|&y| WalkEstimate::exact(y, 0.0, reps)).collect());
    }
    let ymax = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Running maximum before killing, or None when capped.
    let maxima = replicate::map(reps, |i| {
        let mut rng = streams.rng(i as u64);
        let mut s = x;
        let mut top = x;
        for _ in 0..=step_cap {
            if s <= 0.0 || s > ymax {
                return Some(top);
            }
            s += law.sample(&mut rng);
            if s > 0.0 {
                top = top.max(s);
            }
        }
        None
    });
    ys.iter()
        .map(|&y| {
            let samples: Vec<Option<f64>> = maxima.iter().map(|m| m.map(|t| if t > y { y } else { 0.0 })).collect();
            collect(y, reps, samples)
        })
        .collect()
}

/// Both sides of a many-to-one identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedReport {
    pub tree: SummaryStats,
    pub walk: SummaryStats,
    pub diff: f64,
    pub z: f64,
    /// Both sides computed without sampling.
    pub exact: bool,
    pub capped: usize,
}

fn paired(tree: SummaryStats, walk: SummaryStats, capped: usize) -> PairedReport {
    let diff = tree.mean - walk.mean;
    let se = (tree.stderr * tree.stderr + walk.stderr * walk.stderr).sqrt();
    PairedReport {
        tree,
        walk,
        diff,
        z: z_score(diff, se, walk.mean),
        exact: tree.is_exact() && walk.is_exact(),
        capped,
    }
}

const MAX_ENUMERATED: usize = 1 << 20;

/// `E g(S_1..S_k)` over all atom paths of a discrete law, where `k` is the
/// first index at which `stop` holds (or `n` when `stop` is `None`).
fn enumerate<G: Fn(&[f64]) -> f64>(
    atoms: &[f64],
    probs: &[f64],
    depth: Option<usize>,
    upper: f64,
    g: &G,
) -> Option<f64> {
    fn rec<G: Fn(&[f64]) -> f64>(
        atoms: &[f64],
        probs: &[f64],
        depth: Option<usize>,
        upper: f64,
        g: &G,
        path: &mut Vec<f64>,
        prob: f64,
        budget: &mut usize,
    ) -> Option<f64> {
        let s = path.last().copied().unwrap_or(0.0);
        let done = match depth {
            Some(n) => path.len() == n,
            None => s > upper,
        };
        if done {
            if *budget == 0 {
                return None;
            }
            *budget -= 1;
            return Some(prob * g(path));
        }
        if path.len() >= 4096 {
            return None;
        }
        let mut acc = 0.0;
        for (&x, &p) in atoms.iter().zip(probs) {
            path.push(s + x);
            let v = rec(atoms, probs, depth, upper, g, path, prob * p, budget);
            path.pop();
            acc += v?;
        }
        Some(acc)
    }
    if depth.is_none() && atoms.iter().any(|&x| x <= 0.0) {
        return None;
    }
    let mut budget = MAX_ENUMERATED;
    rec(atoms, probs, depth, upper, g, &mut Vec::new(), 1.0, &mut budget)
}

/// Compares `E sum_{|v| = n} L(v)^alpha g(-log L(v_1), ..., -log L(v_n))`
/// with `E g(S_1, ..., S_n)`. Deterministic models are evaluated exactly
/// on both sides.
#[allow(clippy::too_many_arguments)]
pub fn many_to_one_verify<G>(
    model: &WeightModel,
    alpha: f64,
    n: usize,
    g: G,
    reps: usize,
    pop_cap: usize,
    tol: f64,
    streams: &Streams,
) -> Result<PairedReport>
where
    G: Fn(&[f64]) -> f64 + Sync + Send,
{
    check_reps(reps)?;
    let law = make_increment_law(model, alpha, tol)?;
    let tree_side = |i: usize| -> Result<f64> {
        let tree = brw::grow(model, n, pop_cap, &mut streams.sub("tree").rng(i as u64))?;
        let gen = tree.generation(n)?;
        let mut buf = Vec::with_capacity(n);
        let terms: Vec<f64> = (0..gen.len())
            .map(|k| {
                tree.path_positions(n, k, &mut buf);
                gen.nodes[k].l_pow(alpha) * g(&buf)
            })
            .collect();
        Ok(crate::stats::pairwise_sum(&terms))
    };
    let tree = if model.is_deterministic() {
        SummaryStats::exact(tree_side(0)?)
    } else {
        mean_ci(&replicate::try_map(reps, tree_side)?, DEFAULT_LEVEL)?
    };
    let exact_walk = match &law {
        IncrementLaw::Discrete { atoms, probs, .. } => enumerate(atoms, probs, Some(n), 0.0, &g),
        _ => None,
    };
    let walk = match exact_walk {
        Some(v) => SummaryStats::exact(v),
        None => {
            let sub = streams.sub("walk");
            let v = replicate::map(reps, |i| {
                let mut rng = sub.rng(i as u64);
                let mut path = Vec::with_capacity(n);
                let mut s = 0.0;
                for _ in 0..n {
                    s += law.sample(&mut rng);
                    path.push(s);
                }
                g(&path)
            });
            mean_ci(&v, DEFAULT_LEVEL)?
        }
    };
    Ok(paired(tree, walk, 0))
}

/// Compares the tree sum over the first-passage line of level `a` with the
/// walk stopped when it first exceeds `-log a`. The functional receives the
/// path `S_1, ..., S_sigma` (empty when the root is on the line).
#[allow(clippy::too_many_arguments)]
pub fn many_to_one_stopped_verify<G>(
    model: &WeightModel,
    alpha: f64,
    a: f64,
    g: G,
    reps: usize,
    step_cap: usize,
    tol: f64,
    streams: &Streams,
) -> Result<PairedReport>
where
    G: Fn(&[f64]) -> f64 + Sync + Send,
{
    check_reps(reps)?;
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidArgument("level a must lie in (0, 1]".into()));
    }
    let law = make_increment_law(model, alpha, tol)?;
    let tree_side = |i: usize| -> Result<f64> {
        let line = brw::first_passage_line(model, a, step_cap, &mut streams.sub("tree").rng(i as u64))?;
        let terms: Vec<f64> = line
            .members
            .iter()
            .map(|m: &LineMember| m.record.l_pow(alpha) * g(&m.path))
            .collect();
        Ok(crate::stats::pairwise_sum(&terms))
    };
    let tree = if model.is_deterministic() {
        SummaryStats::exact(tree_side(0)?)
    } else {
        mean_ci(&replicate::try_map(reps, tree_side)?, DEFAULT_LEVEL)?
    };
    let level = -(a.ln());
    let exact_walk = match &law {
        IncrementLaw::Discrete { atoms, probs, .. } => enumerate(atoms, probs, None, level, &g),
        _ => None,
    };
    let (walk, capped) = match exact_walk {
        Some(v) => (SummaryStats::exact(v), 0),
        None => {
            let sub = streams.sub("walk");
            let v = replicate::map(reps, |i| {
                let mut rng = sub.rng(i as u64);
                let mut path = Vec::new();
                let mut s = 0.0;
                for _ in 0..step_cap {
                    if s > level {
                        return Some(g(&path));
                    }
                    s += law.sample(&mut rng);
                    path.push(s);
                }
                None
            });
            let kept: Vec<f64> = v.iter().flatten().copied().collect();
            (mean_ci(&kept, DEFAULT_LEVEL)?, reps - kept.len())
        }
    };
    Ok(paired(tree, walk, capped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::log_moment;
    use core::f64::consts::LN_2;

    fn dyadic() -> WeightModel {
        WeightModel::deterministic(&[0.5, 0.5]).unwrap()
    }

    fn boundary() -> WeightModel {
        WeightModel::gaussian_binary(2.0 * LN_2, 2.0 * LN_2).unwrap()
    }

    #[test]
    fn normal_harmonic_function_by_quadrature() {
        let sd = (2.0 * core::f64::consts::LN_2).sqrt();
        let t = HarmonicTable::normal_quadrature(sd, 30.0, 600).unwrap();
        // Mean first weak descending ladder height of a symmetric continuous walk.
        assert!((t.eval(1e-9) - sd / core::f64::consts::SQRT_2).abs() < 1e-3, "{}", t.eval(1e-9));
        let law = IncrementLaw::normal(0.0, sd * sd).unwrap();
        let xs: Vec<f64> = (0..8).map(|k| 0.25 + 2.0 * k as f64).collect();
        let r = verify_harmonic(&law, |x| t.eval(x), &xs, 400_000, 4.0, &Streams::new(8)).unwrap();
        assert!(r.pass, "{:?}", r.rows);
        let rel = r.rows.iter().map(|row| (row.value / row.expected.mean - 1.0).abs()).fold(0.0, f64::max);
        assert!(rel < 2e-3, "{rel}");
    }

    #[test]
    fn laws_built_from_models() {
        let l = make_increment_law(&dyadic(), 1.0, 1e-12).unwrap();
        match &l {
            IncrementLaw::Discrete { atoms, probs, .. } => {
                assert_eq!(atoms, &vec![LN_2]);
                assert_eq!(probs, &vec![1.0]);
            }
            _ => panic!(),
        }
        let l = make_increment_law(&boundary(), 1.0, 1e-12).unwrap();
        assert_eq!(l, IncrementLaw::normal(0.0, 2.0 * LN_2).unwrap());
        assert!(matches!(make_increment_law(&dyadic(), 0.5, 1e-9), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn unequal_pair_law_sums_to_one() {
        let mut lo = 0.1;
        let mut hi = 3.0;
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if 0.6f64.powf(m) + 0.3f64.powf(m) > 1.0 { lo = m } else { hi = m }
        }
        let alpha = 0.5 * (lo + hi);
        let l = make_increment_law(&WeightModel::deterministic(&[0.6, 0.3]).unwrap(), alpha, 1e-12).unwrap();
        match l {
            IncrementLaw::Discrete { atoms, probs, .. } => {
                assert_eq!(atoms, vec![-(0.6f64.ln()), -(0.3f64.ln())]);
                assert!((probs[0] - 0.6f64.powf(alpha)).abs() < 1e-12);
                assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
            _ => panic!(),
        }
    }

    #[test]
    fn tilted_normal_matches_moments() {
        // E S_1 = -m'(alpha) and E S_1^2 = m''(alpha) for the tilted law.
        let m = WeightModel::gaussian_binary(1.0, 0.5).unwrap();
        let mut lo = 0.01;
        let mut hi = 2.0;
        for _ in 0..200 {
            let a = 0.5 * (lo + hi);
            if m.closed_moment(a).unwrap() > 1.0 { lo = a } else { hi = a }
        }
        let alpha = 0.5 * (lo + hi);
        let law = make_increment_law(&m, alpha, 1e-12).unwrap();
        let s = Streams::new(4);
        let v: Vec<f64> = (0..100_000).map(|i| law.sample(&mut s.rng(i))).collect();
        let st = mean_ci(&v, 0.95).unwrap();
        let lm = log_moment(&m, alpha, 1, &s).unwrap().mean;
        assert!(st.z_against(-lm).abs() < 4.0);
        let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
        let st2 = mean_ci(&sq, 0.95).unwrap();
        assert!(st2.z_against(m.closed_log_moment(alpha, 2).unwrap()).abs() < 4.0);
    }

    #[test]
    fn rejection_law_mean() {
        // 3 U(0,1) weights: alpha = 2, E S_1 = -3 E U^2 log U = 1/3.
        let m = WeightModel::iid(3, Marginal::Uniform { lo: 0.0, hi: 1.0 }).unwrap();
        let law = make_increment_law(&m, 2.0, 1e-12).unwrap();
        assert_eq!(law.strategy(), "rejection");
        assert!((law.mean().unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let s = Streams::new(5);
        let v: Vec<f64> = (0..50_000).map(|i| law.sample(&mut s.rng(i))).collect();
        assert!(mean_ci(&v, 0.95).unwrap().z_against(1.0 / 3.0).abs() < 4.0);
    }

    #[test]
    fn walk_paths_stop_correctly() {
        let mut rng = Streams::new(0).rng(0);
        let pm = IncrementLaw::symmetric_pm1();
        let p = simulate_until(&pm, -1.0, 0.0, 10.0, 100, &mut rng).unwrap();
        assert_eq!(p.steps(), 0);
        assert_eq!(p.stop, StopReason::Lower);
        let det = IncrementLaw::discrete(&[LN_2], &[1.0]).unwrap();
        let p = simulate_until(&det, 0.0, f64::NEG_INFINITY, 1.0, 100, &mut rng).unwrap();
        assert_eq!(p.steps(), 2);
        assert_eq!(p.last(), 2.0 * LN_2);
        assert_eq!(p.stop, StopReason::Upper);
        match simulate_until(&pm, 5.0, 0.0, 1e9, 3, &mut rng) {
            Err(Error::StepCapExceeded { partial: Some(p), .. }) => assert_eq!(p.positions[0], 5.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn skip_free_walk_hits_zero_exactly() {
        let s = Streams::new(1);
        let pm = IncrementLaw::symmetric_pm1();
        for x in 1..=4 {
            let h = h_ladder(&pm, x as f64, 2000, 100_000, &s).unwrap();
            assert_eq!(h.stats.mean, x as f64);
            assert!(!h.flagged());
        }
        assert_eq!(h_ladder(&pm, -2.0, 10, 10, &s).unwrap().stats.mean, 0.0);
        assert_eq!(tanaka_h_hat(&pm, 0.0, 10, 10, &s).unwrap().stats.mean, 0.0);
    }

    #[test]
    fn tanaka_on_the_pm1_walk() {
        let s = Streams::new(2);
        let pm = IncrementLaw::symmetric_pm1();
        for x in [1.0, 3.0] {
            let est = tanaka_h_hat(&pm, x, 20_000, 100_000, &s).unwrap();
            assert!(est.stats.z_against(x).abs() < 4.0, "{x}: {:?}", est.stats);
        }
    }

    #[test]
    fn harmonic_checks_on_pm1() {
        let s = Streams::new(3);
        let pm = IncrementLaw::symmetric_pm1();
        let xs: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let ok = verify_harmonic(&pm, |x| if x > 0.0 { x } else { 0.0 }, &xs, 1, 4.0, &s).unwrap();
        assert!(ok.pass);
        assert!(ok.rows.iter().all(|r| r.expected.mean == r.value));
        let bad = verify_harmonic(&pm, |x| x * x, &xs[1..], 1, 4.0, &s).unwrap();
        assert!(!bad.pass);
        assert!(verify_harmonic(&pm, |_| 0.0, &xs, 1, 4.0, &s).unwrap().pass);
    }

    #[test]
    fn gamblers_ruin() {
        let s = Streams::new(4);
        let pm = IncrementLaw::symmetric_pm1();
        let (row, _) = verify_stopped_harmonic(&pm, |x| x, 3.0, 10.0, 50_000, 100_000, &s).unwrap();
        assert!(row.z.abs() < 4.0, "{row:?}");
        let lf = limit_formula(&pm, 3.0, &[10.0, 100.0], 50_000, 1_000_000, &s).unwrap();
        assert!(lf[1].stats.z_against(300.0 / 101.0).abs() < 4.0, "{:?}", lf[1]);
        assert!(lf[0].stats.z_against(30.0 / 11.0).abs() < 4.0, "{:?}", lf[0]);
        assert!(limit_formula(&pm, -1.0, &[5.0], 10, 10, &s).unwrap()[0].stats.mean == 0.0);
    }

    #[test]
    fn lattice_overshoot() {
        let s = Streams::new(5);
        let pm = IncrementLaw::symmetric_pm1();
        let r = overshoot_stats(&pm, 2.0, 6.0, 2000, 1_000_000, &s).unwrap();
        assert_eq!(r.overshoot.mean, 1.0);
        assert_eq!(r.quantiles, [1.0; 5]);
        let det = IncrementLaw::discrete(&[LN_2], &[1.0]).unwrap();
        let a = 3.3;
        let r = overshoot_stats(&det, 0.0, a, 10, 100, &s).unwrap();
        assert!((r.overshoot.mean - ((a / LN_2).ceil() * LN_2 - a)).abs() < 1e-12);
    }

    #[test]
    fn table_evaluation() {
        let t = HarmonicTable::from_values(&[ZERO_PLUS, 1.0, 2.0], &[0.5, 1.4, 1.3]).unwrap();
        assert_eq!(t.eval(0.0), 0.0);
        assert_eq!(t.eval(-3.0), 0.0);
        assert_eq!(t.values(), &[0.5, 1.4, 1.4]);
        assert!((t.eval(4.0) - 3.4).abs() < 1e-12);
        assert!((t.eval(1.5) - 1.4).abs() < 1e-12);
        assert_eq!(HarmonicTable::identity().eval(7.0), 7.0);
    }

    #[test]
    fn many_to_one_is_exact_for_the_dyadic_model() {
        let s = Streams::new(0);
        let g = |p: &[f64]| p.iter().enumerate().map(|(k, x)| (k as f64 + 1.0) * x.sin()).sum::<f64>();
        let r = many_to_one_verify(&dyadic(), 1.0, 6, g, 1, 1 << 10, 1e-12, &s).unwrap();
        assert!(r.exact);
        assert_eq!(r.tree.mean.to_bits(), r.walk.mean.to_bits());
        let r = many_to_one_verify(&dyadic(), 1.0, 4, |_| 1.0, 1, 1 << 10, 1e-12, &s).unwrap();
        assert_eq!(r.tree.mean, 1.0);
    }

    #[test]
    fn stopped_many_to_one_dyadic() {
        let s = Streams::new(0);
        let r = many_to_one_stopped_verify(&dyadic(), 1.0, 0.3, |_| 1.0, 1, 1000, 1e-12, &s).unwrap();
        assert_eq!((r.tree.mean, r.walk.mean), (1.0, 1.0));
        let r = many_to_one_stopped_verify(&dyadic(), 1.0, 0.3, |p| *p.last().unwrap(), 1, 1000, 1e-12, &s).unwrap();
        assert_eq!(r.tree.mean, 2.0 * LN_2);
        assert_eq!(r.walk.mean, 2.0 * LN_2);
    }

    #[test]
    fn many_to_one_boundary_small() {
        let s = Streams::new(8);
        let g = |p: &[f64]| if p[p.len() - 1] <= 0.0 { 1.0 } else { 0.0 };
        let r = many_to_one_verify(&boundary(), 1.0, 4, g, 20_000, 1 << 10, 1e-12, &s).unwrap();
        assert!(r.z.abs() < 4.0, "{r:?}");
        let r = many_to_one_stopped_verify(&boundary(), 1.0, 0.2, |p| if p.len() <= 2 { 1.0 } else { 0.0 }, 5_000, 1_000_000, 1e-12, &s).unwrap();
        assert!(r.z.abs() < 4.0, "{r:?}");
    }
}
