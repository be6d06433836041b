//! Summary statistics shared by every Monte Carlo routine.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Default confidence level of reported intervals.
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Absolute numerical floor used when a standard error is exactly zero
/// (deterministic quantities compared after floating-point arithmetic).
pub const FLOAT_FLOOR: f64 = 1e-12;

/// Mean, spread and normal-approximation interval of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    pub sd: f64,
    pub stderr: f64,
    pub n: usize,
    pub level: f64,
}

impl SummaryStats {
    /// A value known without sampling error.
    pub fn exact(value: f64) -> Self {
        SummaryStats {
            mean: value,
            sd: 0.0,
            stderr: 0.0,
            n: 1,
            level: DEFAULT_LEVEL,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.stderr == 0.0
    }

    pub fn half_width(&self) -> f64 {
        normal_quantile(0.5 + self.level / 2.0) * self.stderr
    }

    pub fn ci(&self) -> (f64, f64) {
        let h = self.half_width();
        (self.mean - h, self.mean + h)
    }

    /// z-score of `self.mean - target`.
    pub fn z_against(&self, target: f64) -> f64 {
        z_score(self.mean - target, self.stderr, target)
    }

    /// Scales mean, sd and stderr by `c`.
    pub fn scaled(self, c: f64) -> Self {
        SummaryStats {
            mean: self.mean * c,
            sd: self.sd * c.abs(),
            stderr: self.stderr * c.abs(),
            ..self
        }
    }
}

/// Two-sample Kolmogorov–Smirnov result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsReport {
    pub statistic: f64,
    pub p_value: f64,
    pub critical_value: f64,
    pub level: f64,
    pub n: usize,
    pub m: usize,
}

impl KsReport {
    pub fn rejects(&self) -> bool {
        self.statistic > self.critical_value
    }

    pub fn passes(&self) -> bool {
        !self.rejects()
    }
}

/// Sample mean, standard deviation and standard error.
///
/// The mean is accumulated as offsets from the first sample, so a constant
/// sample returns that constant bit for bit.
pub fn mean_ci(samples: &[f64], level: f64) -> Result<SummaryStats> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    let shift = samples[0];
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let d = x - shift;
        let delta = d - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (d - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    let sd = var.max(0.0).sqrt();
    Ok(SummaryStats {
        mean: shift + mean,
        sd,
        stderr: sd / (n as f64).sqrt(),
        n,
        level,
    })
}

/// Pairwise summation. Summing `2^k` equal terms is exact.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => return 0.0,
        1 => return xs[0],
        2 => return xs[0] + xs[1],
        _ => {}
    }
    let (lo, hi) = xs.split_at(xs.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}

/// z-score of a difference with the given standard error. A zero standard
/// error is replaced by a floating-point floor relative to `scale`.
pub fn z_score(diff: f64, stderr: f64, scale: f64) -> f64 {
    let floor = FLOAT_FLOOR * scale.abs().max(1.0);
    let denom = (stderr * stderr + floor * floor).sqrt();
    diff / denom
}

/// Asymptotic Kolmogorov distribution tail `P(K > lambda)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Classical two-sample KS statistic with the asymptotic critical value at
/// significance `level` (e.g. 0.01).
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> Result<KsReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = if xs[i] <= ys[j] { xs[i] } else { ys[j] };
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        let gap = (i as f64 / n as f64 - j as f64 / m as f64).abs();
        d = d.max(gap);
    }
    let ne = (n as f64 * m as f64) / (n + m) as f64;
    let c_alpha = (-(level / 2.0).ln() / 2.0).sqrt();
    let critical_value = c_alpha / ne.sqrt();
    let sq = ne.sqrt();
    let p_value = kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d);
    Ok(KsReport {
        statistic: d,
        p_value,
        critical_value,
        level,
        n,
        m,
    })
}

/// Inverse of the standard normal CDF (Acklam's rational approximation,
/// relative error below 1.2e-9).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

/// Empirical quantile by linear interpolation of the order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

pub fn median(samples: &[f64]) -> f64 {
    let mut v: Vec<f64> = samples.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile(&v, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;
    use rand::Rng;

    #[test]
    fn constant_samples_have_zero_sd() {
        let s = mean_ci(&[0.1; 37], 0.95).unwrap();
        assert_eq!(s.mean, 0.1);
        assert_eq!(s.sd, 0.0);
        assert_eq!(s.stderr, 0.0);
    }

    #[test]
    fn empty_sample_is_an_error() {
        assert!(matches!(mean_ci(&[], 0.95), Err(Error::EmptySamples)));
        assert!(matches!(
            ks_two_sample(&[], &[1.0], 0.01),
            Err(Error::EmptySamples)
        ));
    }

    #[test]
    fn identical_sets_have_zero_ks() {
        let a = [0.3, 0.1, 0.7, 0.7, 2.0];
        let r = ks_two_sample(&a, &a, 0.01).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.passes());
    }

    #[test]
    fn shifted_uniforms_are_rejected() {
        // CDF gap between U(0,1) and U(0.5,1.5) peaks at 0.5.
        let mut rng = Streams::new(11).rng(0);
        let a: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..10_000).map(|_| 0.5 + rng.random::<f64>()).collect();
        let r = ks_two_sample(&a, &b, 0.01).unwrap();
        assert!((r.statistic - 0.5).abs() < 0.02, "{}", r.statistic);
        assert!(r.rejects());
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn quantiles_of_the_normal() {
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-5);
        assert!((normal_quantile(0.5)).abs() < 1e-12);
        assert!((normal_quantile(0.005) + 2.575829).abs() < 1e-5);
    }

    #[test]
    fn pairwise_sum_beats_running_sum() {
        let v = alloc::vec![0.1; 1 << 20];
        let exact = 0.1 * (1u64 << 20) as f64;
        let naive: f64 = v.iter().sum();
        let err = (pairwise_sum(&v) - exact).abs();
        assert!(err < 1e-9 * exact);
        assert!(err <= (naive - exact).abs());
        for k in 0..8 {
            let v = alloc::vec![0.3; 1 << k];
            assert_eq!(pairwise_sum(&v), 0.3 * (1u64 << k) as f64);
        }
    }

    #[test]
    fn ks_critical_value_matches_table() {
        let a = alloc::vec![0.0; 100];
        let r = ks_two_sample(&a, &a, 0.01).unwrap();
        // 1.6276 * sqrt(2/100)
        assert!((r.critical_value - 0.23018).abs() < 1e-4);
    }
}
