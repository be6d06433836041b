//! Random measures on the boundary of the tree: cylinder masses, the
//! recursive coupling of fixed-point copies along the tree, marked Poisson
//! atoms with one-sided stable marks, and the Campbell identity.

use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::brw::{self, Tree, Vertex};
use crate::error::{Error, Result};
use crate::fixpoint::{build_solution, LimitKind, MartingaleLimitSamples, Modulation, KS_LEVEL};
use crate::replicate;
use crate::rng::{Rng64, Streams};
use crate::stats::{ks_two_sample, mean_ci, KsReport, SummaryStats, DEFAULT_LEVEL};
use crate::weights::WeightModel;

/// Weighting of cylinder masses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassMode {
    /// `sum L(u)^alpha`.
    Regular,
    /// `sum L(u)^alpha (-log L(u))`.
    Boundary,
}

fn weight(rec: &brw::NodeRecord, alpha: f64, mode: MassMode) -> f64 {
    match mode {
        MassMode::Regular => rec.l_pow(alpha),
        MassMode::Boundary => rec.l_pow(alpha) * rec.pos,
    }
}

/// Generation-`n` approximation of the mass of the cylinder of rays through `u`.
pub fn mu_cylinder(tree: &Tree, u: &Vertex, n: usize, alpha: f64, mode: MassMode) -> Result<f64> {
    let d = u.depth();
    if n < d {
        return Err(Error::InvalidArgument("generation must be at least the depth of the cylinder".into()));
    }
    let gen = tree.generation(n)?;
    let Some(iu) = tree.find(u) else {
        return Ok(0.0);
    };
    Ok(gen
        .nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| tree.ancestor(n, *i, d) == iu)
        .map(|(_, r)| weight(r, alpha, mode))
        .sum())
}

/// Masses of all cylinders at depth `d`, measured at generation `n`.
pub fn cylinder_masses(tree: &Tree, d: usize, n: usize, alpha: f64, mode: MassMode) -> Result<Vec<(Vertex, f64)>> {
    if n < d {
        return Err(Error::InvalidArgument("generation must be at least the cylinder depth".into()));
    }
    let top = tree.generation(d)?;
    let gen = tree.generation(n)?;
    let mut mass = alloc::vec![0.0; top.len()];
    for (i, r) in gen.nodes.iter().enumerate() {
        mass[tree.ancestor(n, i, d)] += weight(r, alpha, mode);
    }
    Ok(mass.into_iter().enumerate().map(|(i, m)| (tree.vertex(d, i), m)).collect())
}

/// Root values of the depth-`n` coupling and KS comparisons with the leaf law.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    /// Root samples at the deepest level.
    pub root: Vec<f64>,
    /// KS of the root law at depth `k = 1..=n` against fresh leaf draws.
    pub levels: Vec<KsReport>,
    pub pass: bool,
}

fn coupled_root<R: Rng + ?Sized, X: Fn(&mut Rng64) -> f64>(model: &WeightModel, leaf: &X, depth: usize, rng: &mut R, leaf_rng: &mut Rng64) -> f64 {
    if depth == 0 {
        return leaf(leaf_rng);
    }
    let ws = model.sample(rng);
    ws.as_slice()
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * coupled_root(model, leaf, depth - 1, rng, leaf_rng))
        .sum()
}

/// Builds `X(v) = sum_j T_j(v) X(vj)` from i.i.d. leaf values at depth `k`
/// for `k = 1..=depth` and compares each root law with the leaf law.
pub fn coupling_recursion<X>(model: &WeightModel, leaf: X, depth: usize, reps: usize, streams: &Streams) -> Result<CouplingReport>
where
    X: Fn(&mut Rng64) -> f64 + Sync + Send,
{
    if reps == 0 {
        return Err(Error::EmptySamples);
    }
    let reference_s = streams.sub("reference");
    let reference = replicate::map(reps, |i| leaf(&mut reference_s.rng(i as u64)));
    let mut levels = Vec::with_capacity(depth);
    let mut root = Vec::new();
    for k in 1..=depth {
        let s = streams.sub(&alloc::format!("level{k}"));
        let ls = s.sub("leaves");
        root = replicate::map(reps, |i| coupled_root(model, &leaf, k, &mut s.rng(i as u64), &mut ls.rng(i as u64)));
        levels.push(ks_two_sample(&root, &reference, KS_LEVEL)?);
    }
    let pass = levels.iter().all(|r| r.passes());
    Ok(CouplingReport { root, levels, pass })
}

/// Jump measure `c alpha / Gamma(1 - alpha) x^(-1 - alpha) dx` on
/// `(0, inf)`, whose subordinator has Laplace exponent `c t^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableJumpMeasure {
    alpha: f64,
    c: f64,
}

impl StableJumpMeasure {
    pub fn new(alpha: f64, c: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidIndex(alpha));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument("scale c must be positive".into()));
        }
        Ok(StableJumpMeasure { alpha, c })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn scale(&self) -> f64 {
        self.c
    }

    /// Mass of `(xi, inf)`: `c xi^(-alpha) / Gamma(1 - alpha)`.
    pub fn tail_mass(&self, xi: f64) -> f64 {
        self.c * xi.powf(-self.alpha) / libm::tgamma(1.0 - self.alpha)
    }

    /// Expected total size of the jumps below `xi` per unit intensity:
    /// `c alpha xi^(1 - alpha) / Gamma(2 - alpha)`.
    pub fn compensation(&self, xi: f64) -> f64 {
        self.c * self.alpha * xi.powf(1.0 - self.alpha) / libm::tgamma(2.0 - self.alpha)
    }

    /// A jump conditioned to exceed `xi` (Pareto tail).
    pub fn sample_mark<R: Rng + ?Sized>(&self, xi: f64, rng: &mut R) -> f64 {
        let u: f64 = 1.0 - rng.random::<f64>();
        xi * u.powf(-1.0 / self.alpha)
    }

    /// Exact draw of the subordinator at time `mu`: `E exp(-t X) = exp(-mu c t^alpha)`.
    pub fn sample_total<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> f64 {
        if mu <= 0.0 {
            return 0.0;
        }
        (mu * self.c).powf(1.0 / self.alpha) * positive_stable(self.alpha, rng)
    }
}

/// One-sided stable variable with `E exp(-t S) = exp(-t^alpha)`, by
/// Kanter's representation.
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = PI * (1.0 - rng.random::<f64>());
    let e: f64 = Exp1.sample(rng);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = ((1.0 - alpha) * u).sin() / e;
    a * b.powf((1.0 - alpha) / alpha)
}

/// Atoms `(mark, prefix)` of the marked Poisson process restricted to
/// marks above `xi_min`, with prefixes at the truncation depth.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryAtomSet {
    pub atoms: Vec<(f64, Vertex)>,
    pub depth: usize,
    pub xi_min: f64,
    /// Small-jump mass per unit cylinder mass.
    pub compensation: f64,
    /// Cylinder masses at the truncation depth.
    pub cylinders: Vec<(Vertex, f64)>,
}

impl BoundaryAtomSet {
    /// Atom marks plus compensation over the cylinder of `u`.
    pub fn mass(&self, u: &Vertex) -> f64 {
        let marks: f64 = self.atoms.iter().filter(|(_, v)| u.is_ancestor_or_self(v)).map(|(m, _)| m).sum();
        let mu: f64 = self.cylinders.iter().filter(|(v, _)| u.is_ancestor_or_self(v)).map(|(_, m)| m).sum();
        marks + self.compensation * mu
    }

    pub fn total_mass(&self) -> f64 {
        self.mass(&Vertex::root())
    }
}

/// Poisson atoms over the depth-`depth` cylinders of `tree`, with cylinder
/// masses measured at the deepest generation held.
pub fn sample_boundary_measure<R: Rng + ?Sized>(
    tree: &Tree,
    depth: usize,
    jumps: &StableJumpMeasure,
    mode: MassMode,
    xi_min: f64,
    rng: &mut R,
) -> Result<BoundaryAtomSet> {
    if !(xi_min > 0.0) {
        return Err(Error::InvalidArgument("xi_min must be positive".into()));
    }
    let cylinders = cylinder_masses(tree, depth, tree.depth(), jumps.alpha(), mode)?;
    let rate = jumps.tail_mass(xi_min);
    let mut atoms = Vec::new();
    for (v, mu) in &cylinders {
        let lam = mu * rate;
        if lam <= 0.0 {
            continue;
        }
        let n = Poisson::new(lam).map_err(|_| Error::InvalidArgument("invalid Poisson rate".into()))?.sample(rng) as u64;
        for _ in 0..n {
            atoms.push((jumps.sample_mark(xi_min, rng), v.clone()));
        }
    }
    Ok(BoundaryAtomSet {
        atoms,
        depth,
        xi_min,
        compensation: jumps.compensation(xi_min),
        cylinders,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampbellRow {
    pub t: f64,
    /// `E exp(-t nu(boundary))`.
    pub empirical: SummaryStats,
    /// The solution `E exp(-c t^alpha mu)` built from the same mass samples.
    pub predicted: f64,
    /// z-score of the paired difference.
    pub z: f64,
}

/// Laplace transform of the total mass `nu` on the exact-stable path, where
/// `nu = (c mu)^(1/alpha) S` given the generation-`n` mass `mu`, against the
/// solution built from the same masses.
#[allow(clippy::too_many_arguments)]
pub fn campbell_check(
    model: &WeightModel,
    alpha: f64,
    c: f64,
    ts: &[f64],
    n: usize,
    reps: usize,
    mode: MassMode,
    streams: &Streams,
) -> Result<Vec<CampbellRow>> {
    let jumps = StableJumpMeasure::new(alpha, c)?;
    if reps == 0 {
        return Err(Error::EmptySamples);
    }
    let cfg = brw::SweepConfig { alpha, generations: n, pop_cap: usize::MAX, floor: 0.0 };
    let ms = streams.sub("mass");
    let mus = replicate::try_map(reps, |i| {
        let tr = brw::sweep(model, &cfg, &mut ms.rng(i as u64))?;
        Ok(match mode {
            MassMode::Regular => tr.w[n],
            MassMode::Boundary => tr.z[n].max(0.0),
        })
    })?;
    let ss = streams.sub("stable");
    let nus: Vec<f64> = replicate::map(reps, |i| jumps.sample_total(mus[i], &mut ss.rng(i as u64)));
    let kind = match mode {
        MassMode::Regular => LimitKind::Additive,
        MassMode::Boundary => LimitKind::Derivative,
    };
    let samples = MartingaleLimitSamples::from_values(kind, alpha, n, mus.clone());
    let h = Modulation::constant(c, alpha)?;
    let mut rows = Vec::with_capacity(ts.len());
    for &t in ts {
        let (predicted, empirical, z) = if t <= 0.0 {
            (1.0, SummaryStats::exact(1.0), 0.0)
        } else {
            let f = build_solution(&h, &samples, &[t])?;
            let e: Vec<f64> = nus.iter().map(|v| (-t * v).exp()).collect();
            let ct = c * t.powf(alpha);
            let d: Vec<f64> = nus.iter().zip(&mus).map(|(v, m)| (-t * v).exp() - (-ct * m).exp()).collect();
            let ds = mean_ci(&d, DEFAULT_LEVEL)?;
            (f.values()[0], mean_ci(&e, DEFAULT_LEVEL)?, crate::stats::z_score(ds.mean, ds.stderr, 1.0))
        };
        rows.push(CampbellRow { t, empirical, predicted, z });
    }
    Ok(rows)
}
