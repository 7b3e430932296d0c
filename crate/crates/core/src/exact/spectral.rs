//! Spectral gap of the reversible generator.
//!
//! With `D = diag(μ)`, the matrix `S = D^{1/2} 𝓛 D^{−1/2}` is symmetric,
//! `S_ij = √(q_ij q_ji)`, and has the spectrum of `𝓛`. Its top eigenvector is
//! `√μ` with eigenvalue 0, so the gap is the largest eigenvalue of `−S`
//! restricted to `√μ^⊥`, negated. Dense for small systems, restarted
//! Lanczos with full reorthogonalization above that.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{ExactError, SparseGenerator, StateSpaceIndex};
use crate::statespace::ModelParams;

const DENSE_LIMIT: usize = 16;

/// `gap_L`, failing if it is below `κ_L`.
pub fn spectral_gap(params: &ModelParams) -> Result<f64, ExactError> {
    let gap = spectral_gap_value(params)?;
    let kappa = params.kappa();
    if gap < kappa * (1.0 - 1e-12) {
        return Err(ExactError::GapBelowKappa { gap, kappa });
    }
    Ok(gap)
}

/// `gap_L` without the comparison to `κ_L`. At `λ = 0` the chain lives on the
/// lifted paths and the gap is that of `Ω_{L−2}` at `λ = 1`.
pub fn spectral_gap_value(params: &ModelParams) -> Result<f64, ExactError> {
    let l = params.length();
    if params.lambda() == 0.0 {
        if l <= 2 {
            return Ok(f64::INFINITY);
        }
        return spectral_gap_value(&ModelParams::new(l - 2, 1.0).expect("valid"));
    }
    if l == 2 {
        return Ok(f64::INFINITY);
    }
    let index = StateSpaceIndex::enumerate(l)?;
    let gen = SparseGenerator::build(&index, params);
    let mu = index.equilibrium(params);
    if l <= DENSE_LIMIT {
        Ok(dense_gap(&gen))
    } else {
        lanczos_gap(&gen, &mu)
    }
}

fn symmetric_entries(gen: &SparseGenerator, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
    gen.row(i).iter().map(move |e| (e.to, (e.rate * gen.entry(e.to, i)).sqrt()))
}

fn dense_gap(gen: &SparseGenerator) -> f64 {
    let n = gen.size();
    let mut s = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        s[(i, i)] = -gen.diagonal(i);
        for (j, v) in symmetric_entries(gen, i) {
            s[(i, j)] -= v;
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev[1]
}

/// Compressed symmetric rows of `−S`.
struct SymOp {
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl SymOp {
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = self.diag[i] * v[i];
            for &(j, w) in &self.rows[i] {
                s -= w * v[j];
            }
            *o = s;
        }
    }
}

fn lanczos_gap(gen: &SparseGenerator, mu: &[f64]) -> Result<f64, ExactError> {
    let n = gen.size();
    let op = SymOp {
        rows: (0..n).map(|i| symmetric_entries(gen, i).collect()).collect(),
        diag: (0..n).map(|i| -gen.diagonal(i)).collect(),
    };
    let root: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
    // B = c·I − (−S) has top eigenvalue c − gap on √μ^⊥ once c ≥ ‖−S‖.
    let c = 2.0 * gen.max_exit_rate();
    let deflate = |v: &mut [f64]| {
        let d: f64 = v.iter().zip(&root).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(&root).for_each(|(a, b)| *a -= d * b);
    };
    let apply_b = |v: &[f64], out: &mut [f64]| {
        op.apply(v, out);
        out.iter_mut().zip(v).for_each(|(o, x)| *o = c * x - *o);
    };
    let budget = (150_000_000 / (8 * n)).clamp(40, 400).min(n);
    let mut start: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    let mut last_residual = f64::INFINITY;
    for _restart in 0..60 {
        deflate(&mut start);
        normalize(&mut start);
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![0.0; n];
        for k in 0..budget {
            apply_b(&basis[k], &mut w);
            deflate(&mut w);
            let a: f64 = w.iter().zip(&basis[k]).map(|(x, y)| x * y).sum();
            for _ in 0..2 {
                for b in &basis {
                    let d: f64 = w.iter().zip(b).map(|(a, c)| a * c).sum();
                    w.iter_mut().zip(b).for_each(|(a, c)| *a -= d * c);
                }
            }
            alpha.push(a);
            let nb = norm(&w);
            if nb < 1e-13 || k + 1 == budget {
                break;
            }
            beta.push(nb);
            basis.push(w.iter().map(|v| v / nb).collect());
        }
        let m = alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (top, theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, &v)| (i, v))
            .unwrap();
        let y: DVector<f64> = eig.eigenvectors.column(top).into_owned();
        let mut ritz = vec![0.0; n];
        for (j, b) in basis.iter().take(m).enumerate() {
            ritz.iter_mut().zip(b).for_each(|(r, v)| *r += y[j] * v);
        }
        normalize(&mut ritz);
        let mut br = vec![0.0; n];
        apply_b(&ritz, &mut br);
        deflate(&mut br);
        let residual = br.iter().zip(&ritz).map(|(a, r)| (a - theta * r).powi(2)).sum::<f64>().sqrt();
        last_residual = residual;
        if residual < 1e-9 || m == n - 1 {
            return Ok(c - theta);
        }
        start = ritz;
    }
    Err(ExactError::NoConvergence(last_residual))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    v.iter_mut().for_each(|x| *x /= n);
}
