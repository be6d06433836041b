//! The characteristic exponent: the smallest `theta > 0` with `m(theta) = 1`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Streams;
use crate::stats::{mean_ci, SummaryStats, DEFAULT_LEVEL};
use crate::weights::{self, condition_report, power_sum, Classification, WeightModel, DEFAULT_RESOLUTION};

/// Default number of scan points used to bracket the leftmost root.
pub const DEFAULT_SCAN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentResult {
    pub alpha: f64,
    /// Half-width of the interval for `alpha` (0 for closed forms, up to
    /// the bisection tolerance).
    pub half_width: f64,
    /// The caller's bracket.
    pub bracket: (f64, f64),
    /// Final bisection interval.
    pub refined: (f64, f64),
    pub iterations: usize,
    /// `m(alpha)` at the returned root.
    pub m_alpha: SummaryStats,
    /// `m'(alpha) = E sum T^alpha log T` at the returned root.
    pub m_prime_alpha: SummaryStats,
    pub classification: Classification,
}

/// `m(theta)` as a deterministic function of `theta`: closed form or a
/// sample average over one fixed set of draws.
enum Curve {
    Closed,
    Sampled(Vec<Vec<f64>>),
}

struct MomentCurve<'a> {
    model: &'a WeightModel,
    curve: Curve,
}

impl<'a> MomentCurve<'a> {
    fn new(model: &'a WeightModel, budget: usize, streams: &Streams) -> Result<Self> {
        if model.closed_moment(1.0).is_some() {
            return Ok(MomentCurve { model, curve: Curve::Closed });
        }
        if budget == 0 {
            return Err(Error::InvalidArgument("budget must be at least 1".into()));
        }
        let seqs = weights::sample_sequences(model, budget, &streams.sub("crn"));
        Ok(MomentCurve { model, curve: Curve::Sampled(seqs) })
    }

    fn stats<F: Fn(&[f64]) -> f64>(&self, closed: Option<f64>, f: F) -> SummaryStats {
        match &self.curve {
            Curve::Closed => SummaryStats::exact(closed.expect("closed form present")),
            Curve::Sampled(seqs) => {
                let v: Vec<f64> = seqs.iter().map(|s| f(s)).collect();
                mean_ci(&v, DEFAULT_LEVEL).expect("nonempty sample")
            }
        }
    }

    fn m(&self, theta: f64) -> SummaryStats {
        self.stats(self.model.closed_moment(theta), |s| power_sum(s, theta))
    }

    fn m_prime(&self, theta: f64) -> SummaryStats {
        self.stats(self.model.closed_log_moment(theta, 1), |s| {
            s.iter().filter(|&&t| t > 0.0).map(|&t| t.powf(theta) * t.ln()).sum()
        })
    }

    fn excess(&self, theta: f64) -> f64 {
        self.m(theta).mean - 1.0
    }

    fn is_closed(&self) -> bool {
        matches!(self.curve, Curve::Closed)
    }
}

/// [`solve_alpha_with`] using the default scan resolution.
pub fn solve_alpha(
    model: &WeightModel,
    bracket: (f64, f64),
    tol: f64,
    budget: usize,
    streams: &Streams,
) -> Result<ExponentResult> {
    solve_alpha_with(model, bracket, tol, budget, DEFAULT_SCAN, streams)
}

/// Scans `bracket` on `scan` log-spaced points, brackets the leftmost sign
/// change of `m - 1` and bisects it down to width `tol`. A tangential root
/// (minimum of `m` touching 1, as in the boundary case) is located by
/// golden-section search around the smallest scanned value.
pub fn solve_alpha_with(
    model: &WeightModel,
    bracket: (f64, f64),
    tol: f64,
    budget: usize,
    scan: usize,
    streams: &Streams,
) -> Result<ExponentResult> {
    let (lo, hi) = bracket;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!("bracket ({lo}, {hi}) must satisfy 0 < lo < hi")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }
    let scan = scan.max(2);
    let curve = MomentCurve::new(model, budget, streams)?;
    let ratio = (hi / lo).ln();
    let grid: Vec<f64> = (0..scan)
        .map(|i| if i + 1 == scan { hi } else { lo * (ratio * i as f64 / (scan - 1) as f64).exp() })
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&t| curve.excess(t)).collect();

    let mut iterations = 0;
    let mut refined = None;
    for i in 0..scan {
        if vals[i] == 0.0 {
            refined = Some((grid[i], grid[i]));
            break;
        }
        if i + 1 < scan && (vals[i] > 0.0) != (vals[i + 1] > 0.0) && vals[i + 1] != 0.0 {
            let (mut a, mut b) = (grid[i], grid[i + 1]);
            let sa = vals[i] > 0.0;
            while b - a > tol {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                iterations += 1;
                let v = curve.excess(mid);
                if v == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if (v > 0.0) == sa {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            refined = Some((a, b));
            break;
        }
    }

    let refined = match refined {
        Some(r) => r,
        None => {
            // No sign change: look for a tangential root at the scan minimum.
            let imin = (0..scan).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
            let a = grid[imin.saturating_sub(1)];
            let b = grid[(imin + 1).min(scan - 1)];
            let (t, its) = golden_min(|x| curve.excess(x), a, b, tol);
            iterations += its;
            let m = curve.m(t);
            let admissible = if curve.is_closed() {
                (m.mean - 1.0).abs() <= tol
            } else {
                (m.mean - 1.0).abs() <= 3.0 * m.stderr
            };
            if !admissible {
                return Err(Error::NoRootInBracket { lo, hi });
            }
            (t, t)
        }
    };

    let alpha = 0.5 * (refined.0 + refined.1);
    let m_alpha = curve.m(alpha);
    let m_prime_alpha = curve.m_prime(alpha);
    let mut half_width = 0.5 * (refined.1 - refined.0);
    if !curve.is_closed() {
        // Delta method: noise in m-hat moves the root by se / |m'|.
        let slope = m_prime_alpha.mean.abs();
        if slope <= 3.0 * m_prime_alpha.stderr && refined.0 != refined.1 {
            return Err(Error::StochasticAmbiguity { theta: alpha });
        }
        if slope > 0.0 {
            half_width += m_alpha.half_width() / slope;
        }
    }
    let classification = weights::classify_derivative(&m_prime_alpha, DEFAULT_RESOLUTION);
    Ok(ExponentResult {
        alpha,
        half_width,
        bracket,
        refined,
        iterations,
        m_alpha,
        m_prime_alpha,
        classification,
    })
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, usize) {
    let g = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut its = 0;
    while b - a > tol && its < 200 {
        its += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    (0.5 * (a + b), its)
}

/// Regular / Boundary / Indeterminate at `alpha`, by the condition-report rule.
pub fn classify(model: &WeightModel, alpha: f64, budget: usize, streams: &Streams) -> Result<Classification> {
    Ok(condition_report(model, alpha, budget, DEFAULT_RESOLUTION, streams)?.classification)
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::LN_2;

    fn bisect_oracle(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f(m) > 0.0) == (f(a) > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn dyadic_and_quarter_models() {
        let s = Streams::new(0);
        let r = solve_alpha(&WeightModel::deterministic(&[0.5, 0.5]).unwrap(), (0.1, 3.0), 1e-12, 1, &s).unwrap();
        assert!((r.alpha - 1.0).abs() < 1e-10);
        assert_eq!(r.classification, Classification::Regular);
        let r = solve_alpha(&WeightModel::deterministic(&[0.25, 0.25]).unwrap(), (0.1, 3.0), 1e-12, 1, &s).unwrap();
        assert!((r.alpha - 0.5).abs() < 1e-10);
    }

    #[test]
    fn unequal_pair_matches_scalar_oracle() {
        let s = Streams::new(0);
        let oracle = bisect_oracle(|x| 0.6f64.powf(x) + 0.3f64.powf(x) - 1.0, 0.1, 3.0);
        assert!((oracle - 0.86).abs() < 0.01);
        let r = solve_alpha(&WeightModel::deterministic(&[0.6, 0.3]).unwrap(), (0.1, 3.0), 1e-13, 1, &s).unwrap();
        assert!((r.alpha - oracle).abs() < 1e-10, "{} vs {}", r.alpha, oracle);
        assert_eq!(classify(&WeightModel::deterministic(&[0.6, 0.3]).unwrap(), r.alpha, 10, &s).unwrap(), Classification::Regular);
    }

    #[test]
    fn equal_pairs_follow_closed_form() {
        let s = Streams::new(0);
        for &b in &[0.1, 0.2, 0.3, 0.45, 0.6, 0.8] {
            let r = solve_alpha(&WeightModel::deterministic(&[b, b]).unwrap(), (0.05, 10.0), 1e-12, 1, &s).unwrap();
            let exact = LN_2 / (1.0 / b).ln();
            assert!((r.alpha - exact).abs() < 1e-10, "b = {b}");
        }
    }

    #[test]
    fn smaller_of_two_roots() {
        // m(theta) = 0.25 * 3^theta + 0.05^theta crosses 1 twice.
        let s = Streams::new(0);
        let m = WeightModel::tabulated(alloc::vec![(alloc::vec![3.0, 0.05], 0.25), (alloc::vec![0.05], 0.75)]).unwrap();
        let f = |x: f64| 0.25 * 3f64.powf(x) + 0.05f64.powf(x) - 1.0;
        let small = bisect_oracle(f, 0.01, 0.5);
        let large = bisect_oracle(f, 0.5, 2.0);
        assert!(small < 0.5 && large > 0.5);
        let r = solve_alpha(&m, (0.01, 2.0), 1e-12, 1, &s).unwrap();
        assert!((r.alpha - small).abs() < 1e-9, "{} vs {}", r.alpha, small);
    }

    #[test]
    fn boundary_model_has_tangential_root() {
        let s = Streams::new(0);
        let m = WeightModel::gaussian_binary(2.0 * LN_2, 2.0 * LN_2).unwrap();
        let r = solve_alpha(&m, (0.1, 3.0), 1e-10, 1, &s).unwrap();
        assert!((r.alpha - 1.0).abs() < 1e-4);
        assert!((r.m_alpha.mean - 1.0).abs() <= 1e-10);
        assert_eq!(r.classification, Classification::Boundary);
        assert_eq!(classify(&m, 1.0, 1000, &s).unwrap(), Classification::Boundary);
    }

    #[test]
    fn no_root_is_reported() {
        let s = Streams::new(0);
        let m = WeightModel::deterministic(&[0.5, 0.5]).unwrap();
        assert!(matches!(solve_alpha(&m, (1.5, 3.0), 1e-10, 1, &s), Err(Error::NoRootInBracket { .. })));
        assert!(solve_alpha(&m, (0.0, 3.0), 1e-10, 1, &s).is_err());
    }

    #[test]
    fn iid_root_is_reproducible() {
        use crate::weights::Marginal;
        // 3 E U^theta = 3 / (theta + 1), root theta = 2.
        let m = WeightModel::iid(3, Marginal::Beta { a: 1.0, b: 1.0 }).unwrap();
        let s = Streams::new(17);
        let r1 = solve_alpha(&m, (0.5, 4.0), 1e-8, 20_000, &s).unwrap();
        let r2 = solve_alpha(&m, (0.5, 4.0), 1e-8, 20_000, &s).unwrap();
        assert_eq!(r1, r2);
        assert!((r1.alpha - 2.0).abs() < 1e-6, "{}", r1.alpha);
    }
}
