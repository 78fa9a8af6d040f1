//! Agreement metrics and bootstrap inference.
//!
//! Bootstrap t-tests resample the sample shifted to have mean `mu0`
//! (imposing the null) and compare the resampled t statistics against the
//! observed one. P-values carry add-one smoothing,
//! `p = (1 + #{|t*| >= |t_obs|}) / (B + 1)`, so `p >= 1 / (B + 1)`.
//! Confidence intervals are plain percentile intervals of resampled means.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Outcome of a bootstrap test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub resamples: usize,
    pub seed: u64,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with `n - 1` denominator.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn check_lengths(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    Ok(())
}

/// Product-moment correlation.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_lengths(xs, ys)?;
    if xs.len() < 2 {
        return Err(Error::UndefinedCorrelation("need at least two pairs".into()));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("an input is constant".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Mean squared difference.
pub fn mse(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_lengths(xs, ys)?;
    if xs.is_empty() {
        return Err(Error::InvalidArgument("mse of empty input".into()));
    }
    Ok(xs.iter().zip(ys).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / xs.len() as f64)
}

fn t_statistic(m: f64, sd: f64, n: f64, mu0: f64) -> f64 {
    if sd > 0.0 {
        (m - mu0) / (sd / n.sqrt())
    } else if m == mu0 {
        0.0
    } else {
        (m - mu0).signum() * f64::INFINITY
    }
}

/// Type-7 (linear interpolation) quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn percentile_interval(mut means: Vec<f64>, level: f64) -> (f64, f64) {
    means.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    (
        quantile_sorted(&means, alpha / 2.0),
        quantile_sorted(&means, 1.0 - alpha / 2.0),
    )
}

fn check_resamples(values: &[f64], resamples: usize) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 values, got {}",
            values.len()
        )));
    }
    if resamples < 1 {
        return Err(Error::InvalidArgument("need at least one resample".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite value {v}")));
    }
    Ok(())
}

/// Two-tailed bootstrap one-sample t-test of `mean == mu0`, with a 95%
/// percentile interval for the mean drawn from the same resamples.
pub fn bootstrap_one_sample_t(values: &[f64], mu0: f64, resamples: usize, seed: u64) -> Result<TestResult> {
    check_resamples(values, resamples)?;
    let n = values.len();
    let nf = n as f64;
    let m = mean(values);
    let var = variance(values);
    if !(var > 0.0) {
        return Err(Error::DegenerateSample("sample variance is zero".into()));
    }
    let t_obs = (m - mu0) / (var.sqrt() / nf.sqrt());
    let shift = mu0 - m;
    let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();

    let mut rng = rng::invocation(seed);
    let mut exceed = 0usize;
    let mut means = Vec::with_capacity(resamples);
    let mut draw = vec![0.0; n];
    for _ in 0..resamples {
        for d in draw.iter_mut() {
            *d = shifted[rng.random_range(0..n)];
        }
        let dm = mean(&draw);
        let sd = variance(&draw).sqrt();
        if t_statistic(dm, sd, nf, mu0).abs() >= t_obs.abs() {
            exceed += 1;
        }
        means.push(dm - shift);
    }
    let (ci_lo, ci_hi) = percentile_interval(means, 0.95);
    Ok(TestResult {
        statistic: t_obs,
        p_value: (1 + exceed) as f64 / (resamples + 1) as f64,
        mean: m,
        ci_lo,
        ci_hi,
        resamples,
        seed,
    })
}

/// Limit of [`bootstrap_one_sample_t`] for a constant sample, which that
/// function rejects. Every shifted resample is constant at `mu0`, so its t
/// is 0: the p-value is `1 / (B + 1)` when the constant differs from `mu0`
/// and 1 otherwise, and the interval collapses to the constant.
pub fn constant_sample_limit(values: &[f64], mu0: f64, resamples: usize, seed: u64) -> Result<TestResult> {
    check_resamples(values, resamples)?;
    let c = values[0];
    if values.iter().any(|&v| v != c) {
        return Err(Error::InvalidArgument("sample is not constant".into()));
    }
    let exceed = if c == mu0 { resamples } else { 0 };
    Ok(TestResult {
        statistic: t_statistic(c, 0.0, values.len() as f64, mu0),
        p_value: (1 + exceed) as f64 / (resamples + 1) as f64,
        mean: c,
        ci_lo: c,
        ci_hi: c,
        resamples,
        seed,
    })
}

/// Paired test: the one-sample test of `a - b` against zero.
pub fn bootstrap_paired_t(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<TestResult> {
    check_lengths(a, b)?;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    bootstrap_one_sample_t(&diffs, 0.0, resamples, seed)
}

/// Percentile bootstrap interval for the mean. Uses the same draws as
/// [`bootstrap_one_sample_t`] for a given seed.
pub fn bootstrap_ci_mean(values: &[f64], resamples: usize, seed: u64, level: f64) -> Result<(f64, f64)> {
    check_resamples(values, resamples)?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must be in (0, 1), got {level}")));
    }
    let n = values.len();
    let mut rng = rng::invocation(seed);
    let mut draw = vec![0.0; n];
    let means = (0..resamples)
        .map(|_| {
            for d in draw.iter_mut() {
                *d = values[rng.random_range(0..n)];
            }
            mean(&draw)
        })
        .collect();
    Ok(percentile_interval(means, level))
}

/// Per-respondent agreement between truth and response values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgreementMetrics {
    /// `None` when either series is constant.
    pub r: Option<f64>,
    pub mse: f64,
}

pub fn agreement_metrics(truth: &[f64], response: &[f64]) -> Result<AgreementMetrics> {
    let mse = mse(truth, response)?;
    let r = match pearson_r(truth, response) {
        Ok(r) => Some(r),
        Err(Error::UndefinedCorrelation(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(AgreementMetrics { r, mse })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_limit() {
        let ones = [1.0; 12];
        assert!(matches!(bootstrap_one_sample_t(&ones, 0.0, 100, 1), Err(Error::DegenerateSample(_))));
        let t = constant_sample_limit(&ones, 0.0, 10_000, 1).unwrap();
        assert_eq!(t.p_value, 1.0 / 10_001.0);
        assert_eq!((t.ci_lo, t.ci_hi), (1.0, 1.0));
        assert_eq!(t.statistic, f64::INFINITY);
        assert_eq!(constant_sample_limit(&ones, 1.0, 50, 1).unwrap().p_value, 1.0);
        assert!(constant_sample_limit(&[1.0, 2.0], 0.0, 50, 1).is_err());
    }

    #[test]
    fn pearson_examples() {
        let xs = [3.0, 17.5, 40.0, 61.25, 90.0];
        assert!((pearson_r(&xs, &xs).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson_r(&xs, &neg).unwrap() + 1.0).abs() < 1e-15);
        // 3 / sqrt(2 * 14/3)
        let r = pearson_r(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 3.0 / (28.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((r - 0.981_980_506).abs() < 1e-9);
    }

    #[test]
    fn pearson_errors() {
        assert!(matches!(
            pearson_r(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(matches!(
            pearson_r(&[1.0, 2.0], &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 5.0], &[1.0, 5.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[10.0, 10.0]).unwrap(), 100.0);
        assert!(mse(&[0.0], &[]).is_err());
    }

    #[test]
    fn symmetric_null_gives_p_one() {
        let values: Vec<f64> = (0..20).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let res = bootstrap_one_sample_t(&values, 0.0, 2000, 1).unwrap();
        assert_eq!(res.statistic, 0.0);
        assert_eq!(res.p_value, 1.0);
    }

    #[test]
    fn paired_reduces_to_one_sample_on_differences() {
        let a = [3.0, 6.0, 9.0, 12.0, 15.0];
        let b = [2.0, 4.0, 6.0, 8.0, 10.0];
        let paired = bootstrap_paired_t(&a, &b, 3000, 11).unwrap();
        let one = bootstrap_one_sample_t(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.0, 3000, 11).unwrap();
        assert_eq!(paired, one);
    }

    #[test]
    fn paired_identical_is_degenerate() {
        let a = [1.0, 2.0, 3.0];
        assert!(matches!(
            bootstrap_paired_t(&a, &a, 100, 0),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn paired_symmetric_differences() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0];
        let res = bootstrap_paired_t(&a, &b, 2000, 5).unwrap();
        assert_eq!(res.p_value, 1.0);
    }

    #[test]
    fn p_value_bounds_and_determinism() {
        let v = [2.1, 3.4, 1.9, 5.5, 4.0, 3.3];
        let a = bootstrap_one_sample_t(&v, 0.0, 500, 9).unwrap();
        let b = bootstrap_one_sample_t(&v, 0.0, 500, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.p_value >= 1.0 / 501.0 && a.p_value <= 1.0);
        assert!(a.ci_lo <= a.mean && a.mean <= a.ci_hi);
    }

    #[test]
    fn test_ci_equals_standalone_ci() {
        let v = [2.1, 3.4, 1.9, 5.5, 4.0, 3.3];
        let t = bootstrap_one_sample_t(&v, 1.0, 800, 21).unwrap();
        let (lo, hi) = bootstrap_ci_mean(&v, 800, 21, 0.95).unwrap();
        assert!((t.ci_lo - lo).abs() < 1e-12 && (t.ci_hi - hi).abs() < 1e-12);
    }

    #[test]
    fn ci_examples() {
        assert_eq!(bootstrap_ci_mean(&[2.5; 6], 200, 3, 0.95).unwrap(), (2.5, 2.5));
        // resampled means of {0, 100} are 0, 50, 100 with mass 1/4, 1/2, 1/4
        let (lo, hi) = bootstrap_ci_mean(&[0.0, 100.0], 20_000, 3, 0.95).unwrap();
        assert_eq!((lo, hi), (0.0, 100.0));
        let (lo, hi) = bootstrap_ci_mean(&[0.0, 100.0], 20_000, 3, 0.4).unwrap();
        assert_eq!((lo, hi), (50.0, 50.0));
        assert!(bootstrap_ci_mean(&[0.0, 1.0], 10, 3, 0.0).is_err());
        assert!(bootstrap_ci_mean(&[0.0, 1.0], 10, 3, 1.0).is_err());
    }

    #[test]
    fn degenerate_and_size_errors() {
        assert!(matches!(
            bootstrap_one_sample_t(&[3.0; 5], 3.0, 10, 0),
            Err(Error::DegenerateSample(_))
        ));
        assert!(bootstrap_one_sample_t(&[1.0], 0.0, 10, 0).is_err());
        assert!(bootstrap_one_sample_t(&[1.0, 2.0], 0.0, 0, 0).is_err());
    }

    #[test]
    fn metrics_exclude_constant_truth() {
        let m = agreement_metrics(&[5.0, 5.0, 5.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.r, None);
        assert!((m.mse - 2.0 / 3.0).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn t_test_is_affine_invariant(
                values in prop::collection::vec(-50.0..50.0f64, 5..15),
                scale in 0.5..20.0f64,
                offset in -100.0..100.0f64,
                seed in any::<u64>(),
            ) {
                prop_assume!(variance(&values) > 1e-6);
                let base = bootstrap_one_sample_t(&values, 1.0, 300, seed).unwrap();
                let moved: Vec<f64> = values.iter().map(|v| v * scale + offset).collect();
                let other = bootstrap_one_sample_t(&moved, scale + offset, 300, seed).unwrap();
                prop_assert!((base.statistic - other.statistic).abs() < 1e-8 * (1.0 + base.statistic.abs()));
                // resampled statistics can tie the observed one to rounding
                prop_assert!((base.p_value - other.p_value).abs() <= 3.0 / 301.0);
                prop_assert!(base.p_value >= 1.0 / 301.0);
            }

            #[test]
            fn pearson_is_affine_invariant(
                pairs in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 3..20),
                a in 0.1..10.0f64,
                b in -10.0..10.0f64,
            ) {
                let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                prop_assume!(variance(&xs) > 1e-6 && variance(&ys) > 1e-6);
                let r = pearson_r(&xs, &ys).unwrap();
                let xs2: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
                prop_assert!((pearson_r(&xs2, &ys).unwrap() - r).abs() < 1e-9);
            }
        }
    }
}
