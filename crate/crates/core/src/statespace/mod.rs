//! The pinning model at equilibrium: paths, weights, exact sampling.

mod params;
mod partition;
mod path;

pub use params::{kappa, mixing_scale, LogWeight, ModelParams, ParamsError};
pub use partition::{
    contact_polynomial, contact_probability, evaluate_contact_polynomial, gibbs_prob,
    log_partition_at, partition_function, sample_equilibrium, EquilibriumSampler,
};
pub use path::{Path, PathError};

/// All of `Ω_L` in canonical order: lexicographic in the step sequence with `+1 < −1`.
pub fn enumerate_paths(length: usize) -> Vec<Path> {
    assert!(length >= 2 && length % 2 == 0, "L must be even and ≥ 2");
    let mut out = Vec::new();
    let mut heights = vec![0i32; length + 1];
    fn walk(x: usize, length: usize, heights: &mut Vec<i32>, out: &mut Vec<Path>) {
        if x == length {
            out.push(Path::from_heights_unchecked(heights.clone()));
            return;
        }
        let h = heights[x];
        let remaining = (length - x) as i32;
        if h + 1 <= remaining - 1 {
            heights[x + 1] = h + 1;
            walk(x + 1, length, heights, out);
        }
        if h >= 1 {
            heights[x + 1] = h - 1;
            walk(x + 1, length, heights, out);
        }
    }
    walk(0, length, &mut heights, &mut out);
    out
}

/// `Catalan(n)` by the product formula; exact for `n ≤ 33`.
pub fn catalan(n: usize) -> u128 {
    let mut c: u128 = 1;
    for k in 0..n as u128 {
        c = c * 2 * (2 * k + 1) / (k + 2);
    }
    c
}
