//! Small estimators shared by the experiments.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided 95% normal quantile.
pub fn z95() -> f64 {
    Normal::standard().inverse_cdf(0.975)
}

/// Wilson score interval for `k` successes out of `n` at normal quantile `z`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// 95% half-width of the two-sample Kolmogorov–Smirnov band.
pub fn ks_half_width(n: usize, m: usize) -> f64 {
    1.358 * ks_scale(n, m)
}

/// Asymptotic Kolmogorov coefficient `c(α) = √(−½ ln(α/2))` for level `1 − α`.
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-0.5 * (alpha / 2.0).ln()).sqrt()
}

/// `√((n + m)/(n m))`.
pub fn ks_scale(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ((n + m) / (n * m)).sqrt()
}

/// Type-7 empirical quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `inf{t ≥ 0 : #{τᵢ > t} / n < ε}` for samples where `None` means "beyond
/// the horizon". `None` when the survival curve has not crossed `ε` by the
/// horizon.
pub fn survival_crossing(samples: &[Option<f64>], eps: f64) -> Option<f64> {
    let n = samples.len();
    if n == 0 {
        return None;
    }
    let mut finite: Vec<f64> = samples.iter().flatten().copied().collect();
    finite.sort_by(f64::total_cmp);
    // after the j-th smallest sample the survival is (n − j)/n
    let j = (n as f64 * (1.0 - eps)).floor() as usize + 1;
    finite.get(j - 1).copied()
}

/// Percentile interval of a statistic over `resamples` bootstrap draws.
/// Statistics that are undefined on a resample count as `+∞`.
pub fn bootstrap_interval<T, R, F>(data: &[T], resamples: usize, rng: &mut R, stat: F) -> Option<(f64, f64)>
where
    T: Copy,
    R: Rng + ?Sized,
    F: Fn(&[T]) -> Option<f64>,
{
    if data.is_empty() || resamples == 0 {
        return None;
    }
    let mut buf = Vec::with_capacity(data.len());
    let mut values = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        buf.clear();
        buf.extend((0..data.len()).map(|_| data[rng.random_range(0..data.len())]));
        values.push(stat(&buf).unwrap_or(f64::INFINITY));
    }
    values.sort_by(f64::total_cmp);
    Some((quantile_sorted(&values, 0.025), quantile_sorted(&values, 0.975)))
}

/// `sup_c |P̂(X > c) − P̂(Y > c)|` over the given thresholds, with the
/// maximising threshold.
pub fn threshold_distance(x_sorted: &[f64], y_sorted: &[f64], thresholds: &[f64]) -> (f64, f64) {
    let tail = |s: &[f64], c: f64| (s.len() - s.partition_point(|&v| v <= c)) as f64 / s.len() as f64;
    let mut best = (0.0, thresholds.first().copied().unwrap_or(0.0));
    for &c in thresholds {
        let d = (tail(x_sorted, c) - tail(y_sorted, c)).abs();
        if d > best.0 {
            best = (d, c);
        }
    }
    best
}

/// `k` quantile levels of the pooled sample, evenly spaced in `(0, 1)`.
pub fn pooled_quantiles(a: &[f64], b: &[f64], k: usize) -> Vec<f64> {
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = (1..=k).map(|i| quantile_sorted(&pooled, i as f64 / (k + 1) as f64)).collect();
    out.dedup();
    out
}
