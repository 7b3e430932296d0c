//! Partition function, Gibbs weights and exact equilibrium sampling.
//!
//! Everything runs off a transfer-matrix sweep over `(x, h)`: from height `h`
//! at column `x` the walk moves to `h ± 1 ≥ 0`, picking up a factor `λ` every
//! time it lands on zero at an interior column. Columns are renormalised as
//! they are produced so that lengths of several thousand stay in range.

use rand::Rng;

use super::params::{LogWeight, ModelParams};
use super::path::Path;

/// `log Z_L(λ)` for any even `L ≥ 0`, with `Z_0 = 1`.
fn log_partition_raw(length: usize, lambda: f64) -> f64 {
    if length == 0 {
        return 0.0;
    }
    if lambda == 0.0 {
        // Contact-free paths of length L are the paths of length L − 2 lifted by one.
        return log_partition_raw(length - 2, 1.0);
    }
    let mut col = vec![1.0f64];
    let mut log_scale = 0.0;
    for x in 1..=length {
        let top = x.min(length - x);
        let mut next = vec![0.0f64; top + 1];
        for (h, &w) in col.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            if h + 1 <= top {
                next[h + 1] += w;
            }
            if h >= 1 && h - 1 <= top {
                let pin = if h == 1 && x < length { lambda } else { 1.0 };
                next[h - 1] += w * pin;
            }
        }
        let max = next.iter().cloned().fold(0.0, f64::max);
        debug_assert!(max > 0.0);
        for v in &mut next {
            *v /= max;
        }
        log_scale += max.ln();
        col = next;
    }
    col[0].ln() + log_scale
}

/// `log Z_L(λ) = log Σ_{ξ∈Ω_L} λ^{N(ξ)}`.
pub fn partition_function(params: &ModelParams) -> LogWeight {
    LogWeight(log_partition_raw(params.length(), params.lambda()))
}

/// `log Z_x(λ)` for an arbitrary even sub-length, `Z_0 = 1`.
pub fn log_partition_at(length: usize, lambda: f64) -> f64 {
    assert!(length % 2 == 0, "partition function needs an even length");
    log_partition_raw(length, lambda)
}

/// `μ_L^λ(ξ) = λ^{N(ξ)} / Z_L(λ)`.
pub fn gibbs_prob(path: &Path, params: &ModelParams) -> f64 {
    debug_assert_eq!(path.length(), params.length());
    let w = LogWeight::power(params.lambda(), path.contacts());
    if w.is_zero() {
        return 0.0;
    }
    (w.value() - partition_function(params).value()).exp()
}

/// `μ(ξ_x = 0) = λ Z_x Z_{L−x} / Z_L` for even interior `x`.
pub fn contact_probability(params: &ModelParams, x: usize) -> f64 {
    let l = params.length();
    if x == 0 || x >= l || x % 2 == 1 {
        return if x == 0 || x == l { 1.0 } else { 0.0 };
    }
    let lam = params.lambda();
    if lam == 0.0 {
        return 0.0;
    }
    (lam.ln() + log_partition_raw(x, lam) + log_partition_raw(l - x, lam)
        - log_partition_raw(l, lam))
    .exp()
}

/// Exact contact-number distribution of `Ω_L`: entry `k` counts paths with
/// `N(ξ) = k`, so `Z_L(λ) = Σ_k c_k λ^k`. Exact for `L ≤ 64`.
pub fn contact_polynomial(length: usize) -> Vec<u128> {
    assert!(length >= 2 && length % 2 == 0 && length <= 64);
    // cols[h] = polynomial in λ (coefficient vector)
    let mut cols: Vec<Vec<u128>> = vec![vec![1]];
    for x in 1..=length {
        let top = x.min(length - x);
        let mut next: Vec<Vec<u128>> = vec![Vec::new(); top + 1];
        for (h, poly) in cols.iter().enumerate() {
            if poly.is_empty() {
                continue;
            }
            if h + 1 <= top {
                add_poly(&mut next[h + 1], poly, 0);
            }
            if h >= 1 && h - 1 <= top {
                let shift = usize::from(h == 1 && x < length);
                add_poly(&mut next[h - 1], poly, shift);
            }
        }
        cols = next;
    }
    cols.swap_remove(0)
}

fn add_poly(acc: &mut Vec<u128>, poly: &[u128], shift: usize) {
    if acc.len() < poly.len() + shift {
        acc.resize(poly.len() + shift, 0);
    }
    for (k, c) in poly.iter().enumerate() {
        acc[k + shift] += c;
    }
}

/// Evaluate `Σ_k c_k λ^k` from [`contact_polynomial`].
pub fn evaluate_contact_polynomial(coeffs: &[u128], lambda: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * lambda + c as f64)
}

/// Exact sampler for `μ_L^λ`.
///
/// Holds the backward table of (column-normalised) suffix weights and builds
/// the path left to right. For `λ = 0` it samples `μ_{L−2}^1` and lifts.
#[derive(Debug, Clone)]
pub struct EquilibriumSampler {
    params: ModelParams,
    lifted: bool,
    /// `suffix[x][h]`: weight of completions from `(x, h)` to `(L, 0)`, scaled per column.
    suffix: Vec<Vec<f64>>,
    inner_length: usize,
    inner_lambda: f64,
}

impl EquilibriumSampler {
    pub fn new(params: ModelParams) -> Self {
        let (lifted, inner_length, inner_lambda) = if params.lambda() == 0.0 {
            (true, params.length() - 2, 1.0)
        } else {
            (false, params.length(), params.lambda())
        };
        let l = inner_length;
        let mut suffix = vec![Vec::new(); l + 1];
        suffix[l] = vec![1.0];
        for x in (0..l).rev() {
            let top = x.min(l - x);
            let above = &suffix[x + 1];
            let mut col = vec![0.0f64; top + 1];
            for (h, slot) in col.iter_mut().enumerate() {
                let mut w = 0.0;
                if h + 1 < above.len() {
                    w += above[h + 1];
                }
                if h >= 1 && h - 1 < above.len() {
                    let pin = if h == 1 && x + 1 < l { inner_lambda } else { 1.0 };
                    w += above[h - 1] * pin;
                }
                *slot = w;
            }
            let max = col.iter().cloned().fold(0.0, f64::max);
            if max > 0.0 {
                for v in &mut col {
                    *v /= max;
                }
            }
            suffix[x] = col;
        }
        Self { params, lifted, suffix, inner_length, inner_lambda }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Path {
        let l = self.inner_length;
        let mut heights = Vec::with_capacity(self.params.length() + 1);
        let mut h = 0usize;
        heights.push(0i32);
        for x in 0..l {
            let above = &self.suffix[x + 1];
            let up = above.get(h + 1).copied().unwrap_or(0.0);
            let down = if h >= 1 {
                let pin = if h == 1 && x + 1 < l { self.inner_lambda } else { 1.0 };
                above.get(h - 1).copied().unwrap_or(0.0) * pin
            } else {
                0.0
            };
            let total = up + down;
            h = if rng.random::<f64>() * total < up { h + 1 } else { h - 1 };
            heights.push(h as i32);
        }
        if self.lifted {
            let mut lifted = Vec::with_capacity(heights.len() + 2);
            lifted.push(0);
            lifted.extend(heights.iter().map(|h| h + 1));
            lifted.push(0);
            heights = lifted;
        }
        Path::from_heights_unchecked(heights)
    }
}

/// Draw a single equilibrium path.
pub fn sample_equilibrium<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> Path {
    EquilibriumSampler::new(*params).sample(rng)
}
