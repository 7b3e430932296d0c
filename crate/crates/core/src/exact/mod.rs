//! Exact small-instance analysis: `Ω_L` as explicit data, the generator as a
//! sparse matrix, its spectral gap, exact laws at time `t` and the TV curves.

mod evolution;
mod oracle;
mod report;
mod spectral;

use std::collections::HashMap;

use thiserror::Error;

pub use evolution::{
    chi_square_bound, chi_square_curve, exact_distribution, exact_tv_curve, lifted_equilibrium, point_mass, tv_distance,
    variance_of_density, worst_case_tv, Distribution, TvCurve, WorstCasePoint, DEFAULT_TOLERANCE,
};
pub use oracle::{brute_force_coupling_check, CouplingCheck, Divergence};
pub use report::{default_grid, exact_report, ExactReport};
pub use spectral::{spectral_gap, spectral_gap_value};

use crate::dynamics::{flip, rate, CensoredSet};
use crate::statespace::{catalan, enumerate_paths, gibbs_prob, ModelParams, Path};

/// Largest `L` enumerated unless the caller raises it.
pub const DEFAULT_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExactError {
    #[error("L = {length} exceeds the enumeration cap {cap}: |Ω_L| = {states} states, about {bytes} bytes")]
    CapExceeded { length: usize, cap: usize, states: u128, bytes: u128 },
    #[error("spectral gap {gap} fell below κ_L = {kappa}")]
    GapBelowKappa { gap: f64, kappa: f64 },
    #[error("distribution has {0} entries but |Ω_L| = {1}")]
    SizeMismatch(usize, usize),
    #[error("distribution puts mass on state {0}, outside the support of μ")]
    OutsideSupport(usize),
    #[error("not a probability vector (total mass {0})")]
    NotProbability(f64),
    #[error("eigensolver did not converge (residual {0})")]
    NoConvergence(f64),
    #[error("path of length {0} does not belong to Ω_{1}")]
    ForeignPath(usize, usize),
    #[error("chi-square bound {bound} is below the exact distance {tv} at t = {t}")]
    ChiSquareViolated { t: f64, bound: f64, tv: f64 },
}

/// Rough memory footprint of enumerating `Ω_L` and its generator.
pub fn memory_estimate(length: usize) -> (u128, u128) {
    let states = catalan(length / 2);
    let per_state = 4 * (length as u128 + 1) + 8 + 2 * 16 * (length as u128 / 2 + 1);
    (states, states.saturating_mul(per_state))
}

/// `Ω_L` in canonical order with its inverse map.
#[derive(Debug, Clone)]
pub struct StateSpaceIndex {
    length: usize,
    states: Vec<Path>,
    index: HashMap<u64, usize>,
}

impl StateSpaceIndex {
    pub fn enumerate(length: usize) -> Result<Self, ExactError> {
        Self::enumerate_with_cap(length, DEFAULT_CAP)
    }

    pub fn enumerate_with_cap(length: usize, cap: usize) -> Result<Self, ExactError> {
        if length > cap {
            let (states, bytes) = memory_estimate(length);
            return Err(ExactError::CapExceeded { length, cap, states, bytes });
        }
        let states = enumerate_paths(length);
        let index = states.iter().enumerate().map(|(i, p)| (p.encode(), i)).collect();
        Ok(Self { length, states, index })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Path] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &Path {
        &self.states[i]
    }

    pub fn position(&self, path: &Path) -> Option<usize> {
        if path.length() != self.length {
            return None;
        }
        self.index.get(&path.encode()).copied()
    }

    /// `μ_L^λ` as a vector over the index.
    pub fn equilibrium(&self, params: &ModelParams) -> Vec<f64> {
        self.states.iter().map(|p| gibbs_prob(p, params)).collect()
    }
}

/// One off-diagonal entry: target state, flipped column, rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub to: usize,
    pub x: usize,
    /// Level of the clock square that performs this flip.
    pub z: i32,
    pub rate: f64,
}

/// `𝓛` in compressed rows; the diagonal is minus the row sum.
#[derive(Debug, Clone)]
pub struct SparseGenerator {
    params: ModelParams,
    offsets: Vec<usize>,
    edges: Vec<Edge>,
    diagonal: Vec<f64>,
}

impl SparseGenerator {
    pub fn build(index: &StateSpaceIndex, params: &ModelParams) -> Self {
        assert_eq!(index.length(), params.length());
        let l = index.length();
        let mut offsets = Vec::with_capacity(index.len() + 1);
        let mut edges = Vec::new();
        let mut diagonal = Vec::with_capacity(index.len());
        offsets.push(0);
        for p in index.states() {
            let mut out = 0.0;
            for x in 1..l {
                let r = rate(p, x, params);
                if r > 0.0 {
                    let q = flip(p, x);
                    let to = index.position(&q).expect("flip stays in Ω_L");
                    edges.push(Edge { to, x, z: p.height(x - 1), rate: r });
                    out += r;
                }
            }
            diagonal.push(-out);
            offsets.push(edges.len());
        }
        Self { params: *params, offsets, edges, diagonal }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn size(&self) -> usize {
        self.diagonal.len()
    }

    pub fn row(&self, i: usize) -> &[Edge] {
        &self.edges[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.diagonal[i]
    }

    /// `q(i, j)` (linear scan of row `i`).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diagonal[i];
        }
        self.row(i).iter().filter(|e| e.to == j).map(|e| e.rate).sum()
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.diagonal.iter().fold(0.0f64, |m, &d| m.max(-d))
    }

    /// Row vector times generator: `(pQ)_j = Σ_i p_i q(i, j)`, with edges whose
    /// clock square lies in `censored` removed.
    pub fn left_apply(&self, p: &[f64], censored: &CensoredSet, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            let mut leave = 0.0;
            for e in self.row(i) {
                if !censored.contains(e.x, e.z) {
                    out[e.to] += pi * e.rate;
                    leave += e.rate;
                }
            }
            out[i] -= pi * leave;
        }
    }

    /// Dense copy, for small instances.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.size();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diagonal[i];
            for e in self.row(i) {
                m[(i, e.to)] += e.rate;
            }
        }
        m
    }
}
