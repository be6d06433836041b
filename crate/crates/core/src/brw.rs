//! The weighted branching process on the Ulam–Harris tree.
//!
//! Positions are kept on the log scale, `pos(v) = -log L(v)`, and accumulated
//! additively from the per-edge steps. The random-walk module builds its
//! increments from the same steps, so deterministic trees and walks agree
//! bit for bit.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::replicate;
use crate::rng::{Rng64, Streams};
use crate::stats::{mean_ci, pairwise_sum, SummaryStats, DEFAULT_LEVEL};
use crate::weights::{Child, WeightModel};

/// A finite word of positive child indices. The root is the empty word.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Vertex(pub Vec<u32>);

impl Vertex {
    pub fn root() -> Self {
        Vertex(Vec::new())
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn child(&self, j: u32) -> Self {
        let mut w = self.0.clone();
        w.push(j);
        Vertex(w)
    }

    /// Prefix of length `k`.
    pub fn truncate(&self, k: usize) -> Self {
        Vertex(self.0[..k.min(self.0.len())].to_vec())
    }

    /// True when `self` is a prefix of `other` (including equality).
    pub fn is_ancestor_or_self(&self, other: &Vertex) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }
}

impl core::fmt::Display for Vertex {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        if self.0.is_empty() {
            return f.write_str("()");
        }
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(".")?;
            }
            write!(f, "{j}")?;
        }
        Ok(())
    }
}

/// Weight data of one vertex: `L(v)`, the running max and min of `L` along
/// the ancestral path, and `pos = -log L(v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeRecord {
    pub l: f64,
    pub lmax: f64,
    pub lmin: f64,
    pub pos: f64,
}

impl NodeRecord {
    pub const ROOT: NodeRecord = NodeRecord {
        l: 1.0,
        lmax: 1.0,
        lmin: 1.0,
        pos: 0.0,
    };

    pub fn child(&self, c: &Child) -> NodeRecord {
        let l = self.l * c.weight;
        NodeRecord {
            l,
            lmax: self.lmax.max(l),
            lmin: self.lmin.min(l),
            pos: self.pos + c.step,
        }
    }

    /// `L(v)^alpha`, falling back to the log scale when `L` underflows.
    #[inline]
    pub fn l_pow(&self, alpha: f64) -> f64 {
        if alpha == 1.0 {
            self.l
        } else if self.l > 1e-300 {
            self.l.powf(alpha)
        } else {
            (-alpha * self.pos).exp()
        }
    }
}

/// One generation of the tree: records with the index of each parent in the
/// previous generation and the child index `j` of the edge into each vertex.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Generation {
    pub nodes: Vec<NodeRecord>,
    pub parent: Vec<u32>,
    pub child: Vec<u32>,
}

impl Generation {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// A tree grown generation by generation. Zero-weight children are pruned
/// at birth.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    generations: Vec<Generation>,
    pop_cap: usize,
    seed: Option<u64>,
}

impl Tree {
    fn root_only(pop_cap: usize, seed: Option<u64>) -> Self {
        Tree {
            generations: vec![Generation {
                nodes: vec![NodeRecord::ROOT],
                parent: vec![0],
                child: vec![0],
            }],
            pop_cap,
            seed,
        }
    }

    /// Index of the deepest generation held.
    pub fn depth(&self) -> usize {
        self.generations.len() - 1
    }

    pub fn pop_cap(&self) -> usize {
        self.pop_cap
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn generation(&self, n: usize) -> Result<&Generation> {
        self.generations.get(n).ok_or(Error::GenerationMissing(n))
    }

    pub fn generations(&self) -> &[Generation] {
        &self.generations
    }

    /// Index in generation `k` of the ancestor of vertex `i` of generation `n`.
    pub fn ancestor(&self, n: usize, mut i: usize, k: usize) -> usize {
        debug_assert!(k <= n);
        for g in (k + 1..=n).rev() {
            i = self.generations[g].parent[i] as usize;
        }
        i
    }

    /// Word of vertex `i` of generation `n`.
    pub fn vertex(&self, n: usize, mut i: usize) -> Vertex {
        let mut w = vec![0u32; n];
        for g in (1..=n).rev() {
            w[g - 1] = self.generations[g].child[i];
            i = self.generations[g].parent[i] as usize;
        }
        Vertex(w)
    }

    /// Positions `-log L` of the ancestors at generations `1..=n` of vertex
    /// `i` of generation `n`.
    pub fn path_positions(&self, n: usize, mut i: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(n, 0.0);
        for g in (1..=n).rev() {
            out[g - 1] = self.generations[g].nodes[i].pos;
            i = self.generations[g].parent[i] as usize;
        }
    }

    /// Position of `v` in its generation, if present.
    pub fn find(&self, v: &Vertex) -> Option<usize> {
        let n = v.depth();
        let gen = self.generations.get(n)?;
        (0..gen.len()).find(|&i| self.vertex(n, i) == *v)
    }

    /// The first-passage line of level `a` among the generations held.
    pub fn first_passage_line(&self, a: f64) -> StoppingLine {
        let mut members = Vec::new();
        let mut buf = Vec::new();
        for (n, gen) in self.generations.iter().enumerate() {
            for (i, rec) in gen.nodes.iter().enumerate() {
                let ancestors_ok = n == 0 || self.generations[n - 1].nodes[gen.parent[i] as usize].lmin >= a;
                if rec.l < a && ancestors_ok {
                    self.path_positions(n, i, &mut buf);
                    members.push(LineMember {
                        vertex: self.vertex(n, i),
                        record: *rec,
                        path: buf.clone(),
                    });
                }
            }
        }
        StoppingLine { a, members }
    }
}

fn grow_into<R: Rng + ?Sized>(
    model: &WeightModel,
    tree: &mut Tree,
    n_max: usize,
    rng: &mut R,
) -> core::result::Result<(), usize> {
    let mut kids = Vec::new();
    while tree.depth() < n_max {
        let prev = &tree.generations[tree.depth()];
        let mut next = Generation::default();
        for (i, rec) in prev.nodes.iter().enumerate() {
            model.children(rng, &mut kids);
            for c in &kids {
                next.nodes.push(rec.child(c));
                next.parent.push(i as u32);
                next.child.push(c.index);
            }
            if next.len() > tree.pop_cap {
                return Err(tree.depth() + 1);
            }
        }
        tree.generations.push(next);
    }
    Ok(())
}

/// Grows a tree for `n_max` generations from the given generator.
pub fn grow<R: Rng + ?Sized>(model: &WeightModel, n_max: usize, pop_cap: usize, rng: &mut R) -> Result<Tree> {
    grow_seeded(model, n_max, pop_cap, None, rng)
}

fn grow_seeded<R: Rng + ?Sized>(
    model: &WeightModel,
    n_max: usize,
    pop_cap: usize,
    seed: Option<u64>,
    rng: &mut R,
) -> Result<Tree> {
    if pop_cap == 0 {
        return Err(Error::InvalidArgument("pop_cap must be at least 1".into()));
    }
    let mut tree = Tree::root_only(pop_cap, seed);
    match grow_into(model, &mut tree, n_max, rng) {
        Ok(()) => Ok(tree),
        Err(generation) => Err(Error::PopulationCapExceeded {
            cap: pop_cap,
            generation,
            partial: Some(Box::new(tree)),
        }),
    }
}

/// Grows a tree for `n_max` generations from `seed`.
pub fn simulate(model: &WeightModel, n_max: usize, pop_cap: usize, seed: u64) -> Result<Tree> {
    let mut rng = Rng64::seed_from_u64(seed);
    grow_seeded(model, n_max, pop_cap, Some(seed), &mut rng)
}

/// `W_n = sum_{|v| = n} L(v)^alpha`.
pub fn additive_w(tree: &Tree, alpha: f64, n: usize) -> Result<f64> {
    let g = tree.generation(n)?;
    let v: Vec<f64> = g.nodes.iter().map(|r| r.l_pow(alpha)).collect();
    Ok(pairwise_sum(&v))
}

/// `Z_n = sum_{|v| = n} L(v)^alpha (-log L(v))`.
pub fn derivative_z(tree: &Tree, alpha: f64, n: usize) -> Result<f64> {
    let g = tree.generation(n)?;
    let v: Vec<f64> = g.nodes.iter().map(|r| r.l_pow(alpha) * r.pos).collect();
    Ok(pairwise_sum(&v))
}

/// `M_n(t) = prod_{|v| = n} f(t L(v))`.
pub fn disintegration_m<F: Fn(f64) -> f64>(tree: &Tree, f: F, t: f64, n: usize) -> Result<f64> {
    let g = tree.generation(n)?;
    Ok(g.nodes.iter().map(|r| f(t * r.l)).product())
}

/// Product of `f(t L(v))` over `|v| = n` with `t L*(v) < a`. Pass
/// `f64::INFINITY` for no truncation.
pub fn truncated_m<F: Fn(f64) -> f64>(tree: &Tree, f: F, t: f64, a: f64, n: usize) -> Result<f64> {
    let g = tree.generation(n)?;
    Ok(g.nodes
        .iter()
        .filter(|r| t * r.lmax < a)
        .map(|r| f(t * r.l))
        .product())
}

/// `sum_{|v| = n} (t L(v))^alpha H(-log(t L(v) / a)) 1{t L*(v) < a}` for
/// `t > 0`, with `H` the harmonic function of the associated walk.
pub fn truncated_z<H: Fn(f64) -> f64>(tree: &Tree, alpha: f64, t: f64, a: f64, h: H, n: usize) -> Result<f64> {
    let g = tree.generation(n)?;
    let shift = a.ln() - t.ln();
    let tpow = t.powf(alpha);
    let v: Vec<f64> = g
        .nodes
        .iter()
        .filter(|r| t * r.lmax < a)
        .map(|r| tpow * r.l_pow(alpha) * h(shift + r.pos))
        .collect();
    Ok(pairwise_sum(&v))
}

/// Probability that the tree has no vertex at generation `n`, estimated over
/// `reps` replicates. Populations above 4096 are counted as surviving.
pub fn extinction_prob(model: &WeightModel, n: usize, reps: usize, streams: &Streams) -> Result<SummaryStats> {
    if n == 0 || reps == 0 {
        return Err(Error::InvalidArgument("n and reps must be at least 1".into()));
    }
    const SURVIVAL: u64 = 1 << 12;
    let dead = replicate::map(reps, |r| {
        let mut rng = streams.rng(r as u64);
        let mut kids = Vec::new();
        let mut count: u64 = 1;
        for _ in 0..n {
            if count == 0 || count > SURVIVAL {
                break;
            }
            let mut next = 0u64;
            if model.is_deterministic() {
                model.children(&mut rng, &mut kids);
                next = count * kids.len() as u64;
            } else {
                for _ in 0..count {
                    model.children(&mut rng, &mut kids);
                    next += kids.len() as u64;
                }
            }
            count = next;
        }
        if count == 0 { 1.0 } else { 0.0 }
    });
    mean_ci(&dead, DEFAULT_LEVEL)
}

/// Member of a stopping line with the positions of its ancestors at
/// generations `1..=depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineMember {
    pub vertex: Vertex,
    pub record: NodeRecord,
    pub path: Vec<f64>,
}

/// The vertices at which `L` enters `[0, a)` for the first time along their
/// ancestral paths.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingLine {
    pub a: f64,
    pub members: Vec<LineMember>,
}

impl StoppingLine {
    /// True when no member is a proper ancestor of another.
    pub fn is_antichain(&self) -> bool {
        let mut words: Vec<&Vertex> = self.members.iter().map(|m| &m.vertex).collect();
        words.sort();
        // After sorting, an ancestor sits directly before some descendant.
        words.windows(2).all(|w| !w[0].is_ancestor_or_self(w[1]))
    }
}

/// Grows the tree depth first, descending only through vertices with
/// `L >= a`, until every branch has crossed below `a` or died. At most
/// `step_cap` vertices are expanded.
pub fn first_passage_line<R: Rng + ?Sized>(
    model: &WeightModel,
    a: f64,
    step_cap: usize,
    rng: &mut R,
) -> Result<StoppingLine> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument("level a must be positive".into()));
    }
    let mut members = Vec::new();
    let mut stack: Vec<(Vertex, NodeRecord, Vec<f64>)> = vec![(Vertex::root(), NodeRecord::ROOT, Vec::new())];
    let mut kids = Vec::new();
    let mut expanded = 0usize;
    while let Some((v, rec, path)) = stack.pop() {
        if rec.l < a {
            members.push(LineMember { vertex: v, record: rec, path });
            continue;
        }
        expanded += 1;
        if expanded > step_cap {
            return Err(Error::StepCapExceeded { cap: step_cap, partial: None });
        }
        model.children(rng, &mut kids);
        // Push in reverse so that children are visited in index order.
        for c in kids.iter().rev() {
            let r = rec.child(c);
            let mut p = path.clone();
            p.push(r.pos);
            stack.push((v.child(c.index), r, p));
        }
    }
    Ok(StoppingLine { a, members })
}

/// `sum_{v in line} L(v)^alpha`.
pub fn line_power_sum(line: &StoppingLine, alpha: f64) -> f64 {
    let v: Vec<f64> = line.members.iter().map(|m| m.record.l_pow(alpha)).collect();
    pairwise_sum(&v)
}

/// Options of a streaming generation sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig {
    pub alpha: f64,
    pub generations: usize,
    pub pop_cap: usize,
    /// Contributions `L^alpha` below this floor are thinned by unbiased
    /// roulette. Zero disables thinning.
    pub floor: f64,
}

/// `W_n` and `Z_n` for `n = 0..=generations` from one tree that is never
/// stored in full.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTrace {
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub max_population: usize,
}

/// Streams the tree one generation at a time, keeping `(pos, importance)`
/// per live vertex. With roulette enabled a vertex whose contribution
/// `c = importance * exp(-alpha pos)` falls below `floor` survives with
/// probability `c / floor` and is then reweighted to contribute exactly
/// `floor`. Every generation sum stays unbiased.
pub fn sweep<R: Rng + ?Sized>(model: &WeightModel, cfg: &SweepConfig, rng: &mut R) -> Result<SweepTrace> {
    // (record, importance weight)
    let mut cur: Vec<(NodeRecord, f64)> = vec![(NodeRecord::ROOT, 1.0)];
    let mut next = Vec::new();
    let mut kids = Vec::new();
    let mut w = vec![1.0];
    let mut z = vec![0.0];
    let mut max_population = 1;
    for g in 1..=cfg.generations {
        next.clear();
        for &(rec, imp) in &cur {
            model.children(rng, &mut kids);
            for c in &kids {
                let r = rec.child(c);
                let lp = r.l_pow(cfg.alpha);
                let contrib = imp * lp;
                if cfg.floor > 0.0 && contrib < cfg.floor {
                    if rng.random::<f64>() * cfg.floor < contrib {
                        next.push((r, cfg.floor / lp));
                    }
                } else {
                    next.push((r, imp));
                }
            }
            if next.len() > cfg.pop_cap {
                return Err(Error::PopulationCapExceeded {
                    cap: cfg.pop_cap,
                    generation: g,
                    partial: None,
                });
            }
        }
        let (mut sw, mut sz) = (0.0, 0.0);
        for (r, imp) in &next {
            let c = imp * r.l_pow(cfg.alpha);
            sw += c;
            sz += c * r.pos;
        }
        w.push(sw);
        z.push(sz);
        max_population = max_population.max(next.len());
        core::mem::swap(&mut cur, &mut next);
    }
    Ok(SweepTrace { w, z, max_population })
}

/// `(W_n, Z_n)` of one tree at generation `n`, computed depth first so that
/// memory stays proportional to `n`. Finite-support models carry exact weight
/// products; other families carry positions only and form `exp(-alpha pos)`
/// at the leaves.
pub fn depth_first_totals<R: Rng + ?Sized>(model: &WeightModel, alpha: f64, n: usize, rng: &mut R) -> (f64, f64) {
    fn by_record<R: Rng + ?Sized>(
        model: &WeightModel,
        alpha: f64,
        left: usize,
        node: NodeRecord,
        bufs: &mut [Vec<Child>],
        rng: &mut R,
        acc: &mut (f64, f64),
    ) {
        if left == 0 {
            let c = node.l_pow(alpha);
            acc.0 += c;
            acc.1 += c * node.pos;
            return;
        }
        let (head, tail) = bufs.split_first_mut().expect("one buffer per level");
        model.children(rng, head);
        for c in head.iter() {
            by_record(model, alpha, left - 1, node.child(c), tail, rng, acc);
        }
    }
    fn by_position<R: Rng + ?Sized>(
        model: &WeightModel,
        alpha: f64,
        left: usize,
        pos: f64,
        bufs: &mut [Vec<f64>],
        rng: &mut R,
        acc: &mut (f64, f64),
    ) {
        let (head, tail) = bufs.split_first_mut().expect("one buffer per level");
        model.child_steps(rng, head);
        if left == 1 {
            for &s in head.iter() {
                let p = pos + s;
                let c = (-alpha * p).exp();
                acc.0 += c;
                acc.1 += c * p;
            }
            return;
        }
        for &s in head.iter() {
            by_position(model, alpha, left - 1, pos + s, tail, rng, acc);
        }
    }
    let mut acc = (0.0, 0.0);
    if model.finite_support().is_some() || n == 0 {
        let mut bufs: Vec<Vec<Child>> = (0..n).map(|_| Vec::with_capacity(4)).collect();
        by_record(model, alpha, n, NodeRecord::ROOT, &mut bufs, rng, &mut acc);
    } else {
        let mut bufs: Vec<Vec<f64>> = (0..n).map(|_| Vec::with_capacity(4)).collect();
        by_position(model, alpha, n, 0.0, &mut bufs, rng, &mut acc);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;

    fn dyadic() -> WeightModel {
        WeightModel::deterministic(&[0.5, 0.5]).unwrap()
    }

    fn boundary() -> WeightModel {
        WeightModel::gaussian_binary(2.0 * LN_2, 2.0 * LN_2).unwrap()
    }

    #[test]
    fn full_binary_tree() {
        let t = simulate(&dyadic(), 3, 1000, 1).unwrap();
        assert_eq!(t.depth(), 3);
        for n in 0..=3 {
            let g = t.generation(n).unwrap();
            assert_eq!(g.len(), 1 << n);
            assert!(g.nodes.iter().all(|r| r.l == 0.5f64.powi(n as i32)));
            assert_eq!(additive_w(&t, 1.0, n).unwrap(), 1.0);
            assert!((derivative_z(&t, 1.0, n).unwrap() - n as f64 * LN_2).abs() < 1e-14);
        }
        assert_eq!(t.vertex(3, 5), Vertex(vec![2, 1, 2]));
        assert_eq!(t.find(&Vertex(vec![2, 1, 2])), Some(5));
        assert!(matches!(t.generation(4), Err(Error::GenerationMissing(4))));
    }

    #[test]
    fn empty_sequence_dies_immediately() {
        let t = simulate(&WeightModel::deterministic(&[]).unwrap(), 5, 10, 0).unwrap();
        assert_eq!(t.generation(0).unwrap().len(), 1);
        assert!(t.generation(1).unwrap().is_empty());
        assert_eq!(additive_w(&t, 1.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn binary_family_fills_every_level() {
        let t = simulate(&boundary(), 10, 1 << 12, 3).unwrap();
        let g = t.generation(10).unwrap();
        assert_eq!(g.len(), 1024);
        assert!(g.nodes.iter().all(|r| r.l > 0.0 && r.lmax >= r.l && r.lmax >= r.lmin));
    }

    #[test]
    fn population_cap_returns_partial_tree() {
        match simulate(&dyadic(), 10, 100, 0) {
            Err(Error::PopulationCapExceeded { generation, partial: Some(p), .. }) => {
                assert_eq!(generation, 7);
                assert_eq!(p.depth(), 6);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quarter_model_w_is_one() {
        let t = simulate(&WeightModel::deterministic(&[0.25, 0.25]).unwrap(), 6, 1000, 0).unwrap();
        for n in 0..=6 {
            assert_eq!(additive_w(&t, 0.5, n).unwrap(), 1.0);
        }
    }

    #[test]
    fn disintegration_of_the_exponential() {
        let t = simulate(&dyadic(), 5, 1000, 0).unwrap();
        let f = |x: f64| (-x).exp();
        for &s in &[0.1, 1.0, 3.0] {
            assert!((disintegration_m(&t, f, s, 0).unwrap() - f(s)).abs() < 1e-15);
            for n in 1..=5 {
                assert!((disintegration_m(&t, f, s, n).unwrap() - f(s)).abs() < 1e-13);
            }
            assert_eq!(disintegration_m(&t, |_| 1.0, s, 3).unwrap(), 1.0);
            assert_eq!(truncated_m(&t, f, s, f64::INFINITY, 4).unwrap(), disintegration_m(&t, f, s, 4).unwrap());
        }
        assert_eq!(truncated_m(&t, f, 2.0, 1.5, 3).unwrap(), 1.0);
    }

    #[test]
    fn truncated_z_root_and_killed_cases() {
        let t = simulate(&boundary(), 4, 1000, 9).unwrap();
        let h = |x: f64| if x > 0.0 { x + 0.5 } else { 0.0 };
        let (s, a) = (0.5, 3.0);
        let root = truncated_z(&t, 1.0, s, a, h, 0).unwrap();
        assert!((root - s * h((a / s).ln())).abs() < 1e-14);
        assert_eq!(truncated_z(&t, 1.0, 4.0, a, h, 2).unwrap(), 0.0);
    }

    #[test]
    fn truncation_is_inactive_below_the_running_max() {
        let f = |x: f64| (-x * x.sqrt()).exp();
        for seed in 0..20 {
            let t = simulate(&boundary(), 8, 1 << 10, seed).unwrap();
            let top = t.generation(8).unwrap().nodes.iter().fold(0.0f64, |m, r| m.max(r.lmax));
            let s = 0.7;
            let a = s * top * 1.0001;
            assert_eq!(truncated_m(&t, f, s, a, 8).unwrap(), disintegration_m(&t, f, s, 8).unwrap());
        }
    }

    #[test]
    fn disintegration_is_monotone_in_t() {
        let t = simulate(&boundary(), 6, 1 << 10, 4).unwrap();
        let f = |x: f64| 1.0 / (1.0 + x);
        let mut prev = 1.0;
        for k in 0..40 {
            let v = disintegration_m(&t, f, 0.01 * 1.3f64.powi(k), 6).unwrap();
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn extinction_probabilities() {
        let s = Streams::new(1);
        assert_eq!(extinction_prob(&dyadic(), 10, 50, &s).unwrap().mean, 0.0);
        assert_eq!(extinction_prob(&WeightModel::deterministic(&[]).unwrap(), 3, 50, &s).unwrap().mean, 1.0);
        let m = WeightModel::tabulated(vec![(vec![], 0.5), (vec![0.4, 0.4, 0.4], 0.5)]).unwrap();
        // Smaller root of s = 1/2 + s^3 / 2.
        let mut q = 0.0;
        for _ in 0..500 {
            q = 0.5 + 0.5 * q * q * q;
        }
        assert!((q - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-9);
        let est = extinction_prob(&m, 40, 20_000, &s).unwrap();
        assert!(est.z_against(q).abs() < 4.0, "{est:?} vs {q}");
    }

    #[test]
    fn lines_of_the_dyadic_tree() {
        let mut rng = Streams::new(0).rng(0);
        let l = first_passage_line(&dyadic(), 1.0, 100, &mut rng).unwrap();
        assert_eq!(l.members.len(), 2);
        assert!(l.members.iter().all(|m| m.vertex.depth() == 1));
        let l = first_passage_line(&dyadic(), 0.3, 100, &mut rng).unwrap();
        assert_eq!(l.members.len(), 4);
        assert!(l.members.iter().all(|m| m.record.l == 0.25 && m.path.len() == 2));
        assert_eq!(line_power_sum(&l, 1.0), 1.0);
        let l = first_passage_line(&dyadic(), 2.0, 100, &mut rng).unwrap();
        assert_eq!(l.members.len(), 1);
        assert_eq!(l.members[0].vertex, Vertex::root());
        assert_eq!(line_power_sum(&l, 1.0), 1.0);
        for &a in &[1.0, 0.7, 0.3, 0.01] {
            let l = first_passage_line(&dyadic(), a, 10_000, &mut rng).unwrap();
            assert_eq!(line_power_sum(&l, 1.0), 1.0);
            assert!(l.is_antichain());
        }
        assert!(matches!(
            first_passage_line(&dyadic(), 1e-6, 10, &mut rng),
            Err(Error::StepCapExceeded { .. })
        ));
    }

    #[test]
    fn stored_line_separates_surviving_rays() {
        for seed in 0..10 {
            let t = simulate(&boundary(), 9, 1 << 10, seed).unwrap();
            let a = 0.2;
            let line = t.first_passage_line(a);
            assert!(line.is_antichain());
            for (i, r) in t.generation(9).unwrap().nodes.iter().enumerate() {
                let v = t.vertex(9, i);
                let hits = line.members.iter().filter(|m| m.vertex.is_ancestor_or_self(&v)).count();
                assert_eq!(hits, usize::from(r.lmin < a), "seed {seed} vertex {v}");
            }
            for m in &line.members {
                assert!(m.record.l < a);
            }
        }
    }

    #[test]
    fn streaming_sweep_without_thinning_matches_stored_tree() {
        let m = boundary();
        let cfg = SweepConfig { alpha: 1.0, generations: 8, pop_cap: 1 << 10, floor: 0.0 };
        let mut r1 = Streams::new(2).rng(0);
        let mut r2 = Streams::new(2).rng(0);
        let trace = sweep(&m, &cfg, &mut r1).unwrap();
        let tree = grow(&m, 8, 1 << 10, &mut r2).unwrap();
        for n in 0..=8 {
            let w = additive_w(&tree, 1.0, n).unwrap();
            let z = derivative_z(&tree, 1.0, n).unwrap();
            assert!((trace.w[n] - w).abs() < 1e-12 * w.max(1.0));
            assert!((trace.z[n] - z).abs() < 1e-11 * z.abs().max(1.0));
        }
    }

    #[test]
    fn depth_first_totals_are_unbiased() {
        // E W_n = 1 and E Z_n = 0 for the boundary model.
        let m = boundary();
        let s = Streams::new(8);
        let (w, z): (Vec<f64>, Vec<f64>) = (0..4000).map(|i| depth_first_totals(&m, 1.0, 8, &mut s.rng(i))).unzip();
        assert!(mean_ci(&w, 0.95).unwrap().z_against(1.0).abs() < 4.0);
        assert!(mean_ci(&z, 0.95).unwrap().z_against(0.0).abs() < 4.0);
        let d = WeightModel::deterministic(&[0.5, 0.5]).unwrap();
        assert_eq!(depth_first_totals(&d, 1.0, 10, &mut s.rng(0)).0, 1.0);
    }

    #[test]
    fn thinned_sweep_is_unbiased() {
        // E W_n = 1 with and without roulette.
        let m = boundary();
        let cfg = SweepConfig { alpha: 1.0, generations: 12, pop_cap: 1 << 16, floor: 1e-3 };
        let s = Streams::new(6);
        let w: Vec<f64> = (0..4000).map(|i| sweep(&m, &cfg, &mut s.rng(i)).unwrap().w[12]).collect();
        let st = mean_ci(&w, 0.95).unwrap();
        assert!(st.z_against(1.0).abs() < 4.0, "{st:?}");
    }
}
