//! Exact laws at time `t` by uniformization, and the distances built on them.
//!
//! `p e^{tQ} = Σ_k Pois(Λt; k) p (I + Q/Λ)^k` with `Λ` above every exit rate.
//! Long times are split into steps with `Λh ≤ 400` so the Poisson weights
//! never underflow; each step's tail is cut once the neglected mass is below
//! its share of the tolerance.

use serde::Serialize;

use super::{ExactError, SparseGenerator, StateSpaceIndex};
use crate::dynamics::{CensoredSet, CensoringSchedule};
use crate::statespace::{ModelParams, Path};

pub type Distribution = Vec<f64>;

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

const MAX_STEP_MASS: f64 = 400.0;

pub fn point_mass(index: &StateSpaceIndex, path: &Path) -> Result<Distribution, ExactError> {
    let i = index
        .position(path)
        .ok_or(ExactError::ForeignPath(path.length(), index.length()))?;
    let mut p = vec![0.0; index.len()];
    p[i] = 1.0;
    Ok(p)
}

/// `½ Σ |p − q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn evolve_constant(gen: &SparseGenerator, p: &mut Vec<f64>, dt: f64, set: &CensoredSet, tol: f64) {
    if dt <= 0.0 {
        return;
    }
    let lam = gen.max_exit_rate() + 1.0;
    let steps = ((lam * dt) / MAX_STEP_MASS).ceil().max(1.0) as usize;
    let h = dt / steps as f64;
    let a = lam * h;
    let step_tol = tol / steps as f64;
    let n = p.len();
    let mut v = vec![0.0; n];
    let mut qv = vec![0.0; n];
    let mut acc = vec![0.0; n];
    for _ in 0..steps {
        v.copy_from_slice(p);
        let mut w = (-a).exp();
        let mut cum = w;
        acc.iter_mut().zip(&v).for_each(|(s, x)| *s = w * x);
        let mut k = 0usize;
        while 1.0 - cum > step_tol || (k as f64) < a {
            gen.left_apply(&v, set, &mut qv);
            v.iter_mut().zip(&qv).for_each(|(x, d)| *x += d / lam);
            k += 1;
            w *= a / k as f64;
            cum += w;
            acc.iter_mut().zip(&v).for_each(|(s, x)| *s += w * x);
            if k > 10_000 + 4 * a as usize {
                break;
            }
        }
        p.copy_from_slice(&acc);
    }
}

/// Evolve `p` from time `from` to `to` under the (possibly censored) generator.
fn evolve_between(
    gen: &SparseGenerator,
    p: &mut Vec<f64>,
    from: f64,
    to: f64,
    schedule: &CensoringSchedule,
    tol: f64,
) {
    let mut t = from;
    let cuts = schedule.breakpoints();
    while t < to {
        let next_cut = cuts.iter().copied().find(|&b| b > t).unwrap_or(f64::INFINITY);
        let end = next_cut.min(to);
        evolve_constant(gen, p, end - t, schedule.set_at(t), tol);
        t = end;
    }
}

/// `ν P_t` (with censoring by `schedule`).
pub fn exact_distribution(
    gen: &SparseGenerator,
    initial: &[f64],
    t: f64,
    schedule: &CensoringSchedule,
    tol: f64,
) -> Distribution {
    let mut p = initial.to_vec();
    evolve_between(gen, &mut p, 0.0, t, schedule, tol);
    p
}

#[derive(Debug, Clone, Serialize)]
pub struct TvCurve {
    pub points: Vec<(f64, f64)>,
    /// Nonincreasing within `1e-12`.
    pub monotone: bool,
}

/// `t ↦ ‖ν P_t − μ‖` on a sorted grid.
pub fn exact_tv_curve(
    gen: &SparseGenerator,
    initial: &[f64],
    mu: &[f64],
    grid: &[f64],
    schedule: &CensoringSchedule,
    tol: f64,
) -> TvCurve {
    let mut p = initial.to_vec();
    let mut now = 0.0;
    let mut points = Vec::with_capacity(grid.len());
    for &t in grid {
        evolve_between(gen, &mut p, now, t, schedule, tol);
        now = t.max(now);
        points.push((t, tv_distance(&p, mu)));
    }
    let monotone = points.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    TvCurve { points, monotone }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WorstCasePoint {
    pub t: f64,
    pub distance: f64,
    /// Index of a state attaining the maximum.
    pub argmax: usize,
    /// Whether `∧` or `∨` attains it (up to `1e-12`).
    pub extremal_attains: bool,
}

/// `max_ξ ‖P_t^ξ − μ‖` on the grid, reporting where it is attained.
pub fn worst_case_tv(
    index: &StateSpaceIndex,
    gen: &SparseGenerator,
    mu: &[f64],
    grid: &[f64],
    tol: f64,
) -> Vec<WorstCasePoint> {
    let none = CensoringSchedule::none();
    let curves: Vec<TvCurve> = (0..index.len())
        .map(|i| {
            let mut d = vec![0.0; index.len()];
            d[i] = 1.0;
            exact_tv_curve(gen, &d, mu, grid, &none, tol)
        })
        .collect();
    let top = 0;
    let bottom = index.len() - 1;
    grid.iter()
        .enumerate()
        .map(|(k, &t)| {
            let (argmax, distance) = curves
                .iter()
                .enumerate()
                .map(|(i, c)| (i, c.points[k].1))
                .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
            let extremal = curves[top].points[k].1.max(curves[bottom].points[k].1);
            WorstCasePoint { t, distance, argmax, extremal_attains: extremal >= distance - 1e-12 }
        })
        .collect()
}

/// `Var_μ(dν/dμ) = Σ ν²/μ − 1`.
pub fn variance_of_density(mu: &[f64], nu: &[f64]) -> Result<f64, ExactError> {
    if mu.len() != nu.len() {
        return Err(ExactError::SizeMismatch(nu.len(), mu.len()));
    }
    let total: f64 = nu.iter().sum();
    if (total - 1.0).abs() > 1e-9 || nu.iter().any(|&v| v < 0.0) {
        return Err(ExactError::NotProbability(total));
    }
    // Σ μ(ρ − 1)², which is exactly zero at ν = μ
    let mut s = 0.0;
    for (i, (&m, &v)) in mu.iter().zip(nu).enumerate() {
        if m <= 0.0 {
            if v > 0.0 {
                return Err(ExactError::OutsideSupport(i));
            }
            continue;
        }
        s += (v - m) * (v - m) / m;
    }
    Ok(s)
}

/// `½ e^{−t·gap} √Var_μ(dν/dμ)`.
pub fn chi_square_bound(mu: &[f64], nu: &[f64], t: f64, gap: f64) -> Result<f64, ExactError> {
    let decay = if t == 0.0 { 1.0 } else { (-t * gap).exp() };
    Ok(0.5 * decay * variance_of_density(mu, nu)?.sqrt())
}

/// `(t, bound, exact TV)` on the grid; fails if the bound is ever below the
/// exact distance (beyond the uniformization tolerance).
pub fn chi_square_curve(
    gen: &SparseGenerator,
    mu: &[f64],
    nu: &[f64],
    grid: &[f64],
    gap: f64,
) -> Result<Vec<(f64, f64, f64)>, ExactError> {
    let curve = exact_tv_curve(gen, nu, mu, grid, &CensoringSchedule::none(), DEFAULT_TOLERANCE);
    let mut out = Vec::with_capacity(grid.len());
    for &(t, tv) in &curve.points {
        let bound = chi_square_bound(mu, nu, t, gap)?;
        if bound < tv - 1e-10 {
            return Err(ExactError::ChiSquareViolated { t, bound, tv });
        }
        out.push((t, bound, tv));
    }
    Ok(out)
}

/// Equilibrium of the unpinned system lifted into `Ω_L`, as a distribution
/// over the index.
pub fn lifted_equilibrium(index: &StateSpaceIndex) -> Distribution {
    let p0 = ModelParams::new(index.length(), 0.0).expect("valid L");
    index.equilibrium(&p0)
}
