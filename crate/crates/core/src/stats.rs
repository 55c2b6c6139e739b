//! Goodness-of-fit tests used by the validation suite.

use crate::specfun::upper_reg_gamma;

/// Two-sided one-sample Kolmogorov–Smirnov statistic `D_n = sup |F_n − F|`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of `D_n` using Stephens' small-sample correction
/// `λ = (√n + 0.12 + 0.11/√n)·D`.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let d = ks_statistic(samples, cdf);
    (d, ks_p_value(d, samples.len()))
}

/// Pearson χ² test of observed counts against Poisson(`mean`).
///
/// Bins are `{0..=lo}`, each integer strictly between, and `{hi..}`; the tail edges are
/// the innermost points at which a tail bin expects at least five counts.
/// Returns `(statistic, dof, p)`.
pub fn chi_square_poisson(counts: &[u64], mean: f64) -> (f64, usize, f64) {
    let n = counts.len() as f64;
    let pmf = |k: u64| {
        (k as f64 * mean.ln() - mean - crate::specfun::ln_gamma_unchecked(k as f64 + 1.0)).exp()
    };
    let mut pmfs = Vec::new();
    let mut total = 0.0;
    while total < 1.0 - 1e-15 && pmfs.len() < 1_000_000 {
        let p = pmf(pmfs.len() as u64);
        pmfs.push(p);
        total += p;
    }
    let cdf: Vec<f64> = pmfs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let lo = cdf.iter().position(|&c| n * c >= 5.0).unwrap_or(0);
    let mut hi = cdf.len() - 1;
    while hi > lo + 1 && n * (1.0 - cdf[hi - 1]) < 5.0 {
        hi -= 1;
    }
    let mut expected = vec![n * cdf[lo]];
    let mut observed = vec![counts.iter().filter(|&&c| c as usize <= lo).count() as f64];
    for k in lo + 1..hi {
        expected.push(n * pmfs[k]);
        observed.push(counts.iter().filter(|&&c| c as usize == k).count() as f64);
    }
    expected.push(n * (1.0 - cdf[hi - 1]));
    observed.push(counts.iter().filter(|&&c| c as usize >= hi).count() as f64);
    let stat: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = expected.len() - 1;
    let p = upper_reg_gamma(dof as f64 / 2.0, stat / 2.0).unwrap_or(f64::NAN);
    (stat, dof, p)
}

/// Regularized lower incomplete gamma `P(a, x)`, the Gamma(a, 1) cdf.
pub fn gamma_cdf(shape: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    1.0 - upper_reg_gamma(shape, x).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_samples_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let (_, p) = ks_test(&xs, |x| x.clamp(0.0, 1.0));
        assert!(p > 0.01, "{p}");
    }

    #[test]
    fn shifted_samples_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>().powf(1.1)).collect();
        let (_, p) = ks_test(&xs, |x| x.clamp(0.0, 1.0));
        assert!(p < 0.01, "{p}");
    }

    #[test]
    fn ks_p_value_known_points() {
        // Kolmogorov distribution: P(K > 1.36) ≈ 0.0495, P(K > 1.63) ≈ 0.0098
        assert!((ks_p_value(1.36 / 1e4, 100_000_000) - 0.0495).abs() < 5e-4);
        assert!((ks_p_value(1.63 / 1e4, 100_000_000) - 0.0098).abs() < 2e-4);
    }

    #[test]
    fn poisson_counts_fit() {
        use rand_distr::{Distribution, Poisson};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = Poisson::new(12.5).unwrap();
        let counts: Vec<u64> = (0..10_000).map(|_| d.sample(&mut rng) as u64).collect();
        let (_, dof, p) = chi_square_poisson(&counts, 12.5);
        assert!(dof > 10 && p > 0.01, "{dof} {p}");
        let (_, _, p) = chi_square_poisson(&counts, 13.5);
        assert!(p < 1e-6);
    }

    #[test]
    fn gamma_cdf_exponential() {
        assert!((gamma_cdf(1.0, 2.0) - (1.0 - (-2f64).exp())).abs() < 1e-14);
        assert_eq!(gamma_cdf(3.0, -1.0), 0.0);
    }
}
