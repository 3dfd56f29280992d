//! Statistical machinery for the verification suite: two-sample and
//! one-sample Kolmogorov-Smirnov tests, moment estimates with standard
//! errors, and residual aggregation.
//!
//! Slice samples live on the lattice (1/N)·ℤ, so the two-sample statistic is
//! evaluated by comparing the right-continuous empirical CDFs at the pooled
//! jump points. Asymptotic p-values are used for large samples; below
//! `asymptotic_min_n` a deterministic permutation test takes over.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatError {
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
}

/// Outcome of a single named check, serialized into the verification report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: Option<f64>,
    pub pass: bool,
    pub n_samples: u64,
    pub notes: String,
}

impl TestReport {
    /// Pass when the statistic stays at or below the threshold.
    pub fn from_statistic(
        name: &str,
        statistic: f64,
        threshold: f64,
        n: u64,
        notes: String,
    ) -> Self {
        TestReport {
            name: name.to_owned(),
            statistic,
            threshold,
            p_value: None,
            pass: statistic <= threshold,
            n_samples: n,
            notes,
        }
    }

    /// Pass when the p-value meets the significance level.
    pub fn from_p_value(
        name: &str,
        statistic: f64,
        p: f64,
        significance: f64,
        n: u64,
        notes: String,
    ) -> Self {
        TestReport {
            name: name.to_owned(),
            statistic,
            threshold: significance,
            p_value: Some(p),
            pass: p >= significance,
            n_samples: n,
            notes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone)]
pub struct KsConfig {
    /// Sample size from which the asymptotic p-value is trusted.
    pub asymptotic_min_n: usize,
    /// Rounds of the permutation fallback below that size.
    pub permutation_rounds: u32,
    /// Seed of the (deterministic) permutation test.
    pub permutation_seed: u64,
}

impl Default for KsConfig {
    fn default() -> Self {
        KsConfig {
            asymptotic_min_n: 1000,
            permutation_rounds: 2000,
            permutation_seed: 0x6b73_7465_7374,
        }
    }
}

/// Two-sample KS statistic: `sup |F_a − F_b|` over the pooled sample points,
/// with ties resolved by comparing the right-continuous empirical CDFs.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() || j < ys.len() {
        // next pooled jump point
        let v = match (xs.get(i), ys.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => break,
        };
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Two-sample KS test with default configuration.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatError> {
    ks_two_sample_with(a, b, &KsConfig::default())
}

pub fn ks_two_sample_with(a: &[f64], b: &[f64], cfg: &KsConfig) -> Result<KsResult, StatError> {
    let min_len = a.len().min(b.len());
    if min_len < 10 {
        return Err(StatError::TooFewSamples {
            min: 10,
            got: min_len,
        });
    }
    let statistic = ks_statistic(a, b);
    let p_value = if min_len >= cfg.asymptotic_min_n {
        let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
        ks_p_asymptotic(statistic, ne)
    } else {
        permutation_p(a, b, statistic, cfg)
    };
    Ok(KsResult { statistic, p_value })
}

/// One-sample KS test of `a` against a continuous CDF.
pub fn ks_one_sample(a: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult, StatError> {
    if a.len() < 10 {
        return Err(StatError::TooFewSamples {
            min: 10,
            got: a.len(),
        });
    }
    let mut xs = a.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(KsResult {
        statistic: d,
        p_value: ks_p_asymptotic(d, n),
    })
}

/// Asymptotic KS tail probability with the Stephens small-sample correction,
/// `ne` being the effective sample size.
fn ks_p_asymptotic(d: f64, ne: f64) -> f64 {
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    kolmogorov_tail(lambda)
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²)`, clamped to [0, 1].
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64).powi(2) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn permutation_p(a: &[f64], b: &[f64], observed: f64, cfg: &KsConfig) -> f64 {
    let mut pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.permutation_seed);
    let mut at_least = 0u32;
    for _ in 0..cfg.permutation_rounds {
        pooled.shuffle(&mut rng);
        let (pa, pb) = pooled.split_at(a.len());
        if ks_statistic(pa, pb) >= observed - 1e-15 {
            at_least += 1;
        }
    }
    (1.0 + at_least as f64) / (1.0 + cfg.permutation_rounds as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub n: usize,
}

/// Sample mean and unbiased variance with their standard errors; the
/// variance SE uses the fourth central moment.
pub fn moments(samples: &[f64]) -> Result<Moments, StatError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatError::TooFewSamples { min: 2, got: n });
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    for &x in samples {
        let d = x - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    let variance = m2 / (nf - 1.0);
    let m4 = m4 / nf;
    let se_mean = (variance / nf).sqrt();
    let var_of_var = (m4 - variance * variance * (nf - 3.0) / (nf - 1.0)) / nf;
    Ok(Moments {
        mean,
        variance,
        se_mean,
        se_variance: var_of_var.max(0.0).sqrt(),
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub max_abs: f64,
    pub mean_abs: f64,
    pub count_exceeding: usize,
}

/// Aggregates pathwise identity residuals against a tolerance.
pub fn residual_summary(residuals: &[f64], tol: f64) -> ResidualSummary {
    let mut max_abs: f64 = 0.0;
    let mut sum_abs = 0.0;
    let mut count_exceeding = 0;
    for &r in residuals {
        let a = r.abs();
        max_abs = max_abs.max(a);
        sum_abs += a;
        if a > tol {
            count_exceeding += 1;
        }
    }
    ResidualSummary {
        max_abs,
        mean_abs: if residuals.is_empty() {
            0.0
        } else {
            sum_abs / residuals.len() as f64
        },
        count_exceeding,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{make_stream, RngPolicy};

    #[test]
    fn identical_samples_have_zero_statistic() {
        let a: Vec<f64> = (0..1500).map(|i| (i % 37) as f64).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn bernoulli_versus_constant_statistic() {
        // a ~ Bernoulli(1/2) on {0,1} (exact counts), b constant 0: D = 0.5.
        let mut a = vec![0.0; 500];
        a.extend(vec![1.0; 500]);
        let b = vec![0.0; 1000];
        assert_eq!(ks_statistic(&a, &b), 0.5);
    }

    #[test]
    fn same_lattice_law_accepts_at_nominal_rate() {
        // Both samples drawn from the same discrete law: p >= 0.01 should
        // hold for at least 95% of seeds.
        let draws = |seed: u64| -> Vec<f64> {
            let mut rng = make_stream(RngPolicy::new(seed, 0));
            (0..10_000)
                .map(|_| {
                    let u = rng.uniform();
                    // geometric-ish lattice law on {0, 0.5, 1.0, ...}
                    let mut k = 0.0;
                    let mut q = 0.4;
                    let mut acc = q;
                    while u > acc && k < 40.0 {
                        k += 1.0;
                        q *= 0.6;
                        acc += q;
                    }
                    k * 0.5
                })
                .collect()
        };
        let mut passes = 0;
        let seeds = 40;
        for s in 0..seeds {
            let a = draws(1000 + 2 * s);
            let b = draws(1001 + 2 * s);
            let r = ks_two_sample(&a, &b).unwrap();
            if r.p_value >= 0.01 {
                passes += 1;
            }
        }
        assert!(passes * 100 >= 95 * seeds, "only {passes}/{seeds} accepted");
    }

    #[test]
    fn ks_is_symmetric_and_monotone_invariant() {
        let mut rng = make_stream(RngPolicy::new(5, 1));
        let a: Vec<f64> = (0..800).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..600).map(|_| rng.normal() * 1.3).collect();
        let d1 = ks_statistic(&a, &b);
        let d2 = ks_statistic(&b, &a);
        assert_eq!(d1, d2);
        let f = |x: f64| x.exp(); // strictly increasing
        let fa: Vec<f64> = a.iter().map(|&x| f(x)).collect();
        let fb: Vec<f64> = b.iter().map(|&x| f(x)).collect();
        assert!((ks_statistic(&fa, &fb) - d1).abs() < 1e-12);
    }

    #[test]
    fn permutation_fallback_is_deterministic() {
        let mut rng = make_stream(RngPolicy::new(9, 0));
        let a: Vec<f64> = (0..50).map(|_| rng.normal()).collect();
        let b: Vec<f64> = (0..60).map(|_| rng.normal() + 0.2).collect();
        let r1 = ks_two_sample(&a, &b).unwrap();
        let r2 = ks_two_sample(&a, &b).unwrap();
        assert_eq!(r1.p_value, r2.p_value);
        assert!(r1.p_value > 0.0 && r1.p_value <= 1.0);
    }

    #[test]
    fn one_sample_against_own_cdf() {
        let mut rng = make_stream(RngPolicy::new(21, 0));
        let a: Vec<f64> = (0..5000).map(|_| rng.uniform()).collect();
        let r = ks_one_sample(&a, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(r.p_value >= 0.01, "p {}", r.p_value);
        // and a clearly wrong CDF is rejected
        let bad = ks_one_sample(&a, |x| (x / 2.0).clamp(0.0, 1.0)).unwrap();
        assert!(bad.p_value < 1e-6);
    }

    #[test]
    fn moments_of_constants_and_bernoulli() {
        let c = vec![3.25; 100];
        let m = moments(&c).unwrap();
        assert_eq!(m.mean, 3.25);
        assert_eq!(m.variance, 0.0);
        let mut ab = vec![0.0; 500];
        ab.extend(vec![1.0; 500]);
        let m = moments(&ab).unwrap();
        assert_eq!(m.mean, 0.5);
        let n = 1000.0;
        assert!((m.variance - n / (n - 1.0) * 0.25).abs() < 1e-12);
    }

    #[test]
    fn moments_of_standard_normals() {
        let mut rng = make_stream(RngPolicy::new(33, 0));
        let xs: Vec<f64> = (0..1_000_000).map(|_| rng.normal()).collect();
        let m = moments(&xs).unwrap();
        assert!(m.mean.abs() <= 3.0e-3, "mean {}", m.mean);
        assert!((m.variance - 1.0).abs() <= 3.0 * m.se_variance);
        assert!(moments(&xs[..1]).is_err());
    }

    #[test]
    fn moments_are_permutation_invariant() {
        let xs = vec![1.0, 5.0, -2.0, 0.5, 9.0];
        let mut ys = xs.clone();
        ys.reverse();
        let (a, b) = (moments(&xs).unwrap(), moments(&ys).unwrap());
        assert_eq!(a.mean, b.mean);
        assert!((a.variance - b.variance).abs() <= 1e-12 * a.variance);
        assert!((a.se_variance - b.se_variance).abs() <= 1e-12 * a.se_variance);
    }

    #[test]
    fn residual_summary_aggregation() {
        let s = residual_summary(&[], 1e-9);
        assert_eq!(
            s,
            ResidualSummary {
                max_abs: 0.0,
                mean_abs: 0.0,
                count_exceeding: 0
            }
        );
        let s = residual_summary(&[1e-12, -2e-12], 1e-9);
        assert_eq!(s.max_abs, 2e-12);
        assert!((s.mean_abs - 1.5e-12).abs() < 1e-24);
        assert_eq!(s.count_exceeding, 0);
        let s = residual_summary(&[1e-6], 1e-9);
        assert_eq!(s.count_exceeding, 1);
    }

    #[test]
    fn residual_max_is_monotone() {
        let base = [1e-10, 5e-10];
        let more = [1e-10, 5e-10, 2e-11];
        assert!(residual_summary(&more, 1.0).max_abs >= residual_summary(&base, 1.0).max_abs);
    }
}
