//! The two protocols behind the extremal-start bound for `λ ∈ (1, 2)`:
//! censoring the contact squares up to `t_{δ/2}`, and the contact profile of
//! `σ^∨` at `s₀ = 10 L^{16/9} log L`.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::mixing::replica_seed;
use super::stats::{ks_half_width, pooled_quantiles, threshold_distance, wilson_interval, z95};
use super::{ExperimentConfig, ExperimentError};
use crate::dynamics::{
    CensoredSet, CensoringSchedule, ChainSpec, ClockRealization, CoupledEngine, DirectChain, Observer, RingRule,
};
use crate::exact::{exact_tv_curve, point_mass, SparseGenerator, StateSpaceIndex, DEFAULT_TOLERANCE};
use crate::observables::AreaWeights;
use crate::rng::{float_tag, stream};
use crate::statespace::{contact_probability, log_partition_at, EquilibriumSampler, ModelParams, Path};

const WEDGE_MU_STREAM: u64 = 0x5745_4447;
const VEE_STREAM: u64 = 0x5645_45;

/// Largest `L` for which the wedge protocol adds the exact comparison.
pub const EXACT_WEDGE_LIMIT: usize = 12;

fn check_lambda(lambda: f64) -> Result<(), ExperimentError> {
    if lambda > 1.0 && lambda < 2.0 {
        Ok(())
    } else {
        Err(ExperimentError::LambdaRange(lambda))
    }
}

fn protocol_lambdas(config: &ExperimentConfig) -> Result<Vec<f64>, ExperimentError> {
    let lams: Vec<f64> = config.lambdas.iter().copied().filter(|&l| l > 1.0 && l < 2.0).collect();
    if lams.is_empty() {
        return Err(ExperimentError::LambdaRange(config.lambdas[0]));
    }
    Ok(lams)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatisticPoint {
    pub t: f64,
    pub d: f64,
    pub ci: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactWedge {
    pub censored: Vec<(f64, f64)>,
    pub uncensored: Vec<(f64, f64)>,
    /// Censored distance ≥ uncensored at every grid time (slack `1e-10`).
    pub inequality_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WedgeReport {
    pub length: usize,
    pub lambda: f64,
    /// `t_{δ/2}`: the contact squares are censored on `[0, t_{δ/2})`.
    pub window_end: f64,
    pub replicas: usize,
    /// Flips of the censored chain that changed `N` inside the window, over all replicas.
    pub contact_changes_in_window: u64,
    /// Largest `N` seen on the window by the censored chain.
    pub max_contacts_in_window: usize,
    pub censored_statistic: Vec<StatisticPoint>,
    pub uncensored_statistic: Vec<StatisticPoint>,
    pub exact: Option<ExactWedge>,
}

struct WindowWatch {
    window_end: f64,
    changes: u64,
    contacts: usize,
    max_contacts: usize,
}

impl Observer for WindowWatch {
    fn on_transition(&mut self, t: f64, chain: usize, _x: usize, old: i32, new: i32) {
        if chain != 0 || t >= self.window_end {
            return;
        }
        if old == 0 || new == 0 {
            self.changes += 1;
            self.contacts = if new == 0 { self.contacts + 1 } else { self.contacts.saturating_sub(1) };
            self.max_contacts = self.max_contacts.max(self.contacts);
        }
    }
}

struct WedgeReplica {
    changes: u64,
    max_contacts: usize,
    censored_phi: Vec<f64>,
    free_phi: Vec<f64>,
}

fn wedge_replica(length: usize, lambda: f64, seed: u64, window_end: f64, grid: &[f64]) -> WedgeReplica {
    let top = Path::maximal(length).expect("valid L");
    let schedule = Arc::new(CensoringSchedule::window(CensoredSet::Contacts, window_end));
    let specs = vec![ChainSpec::pinned(&top, lambda).with_schedule(schedule), ChainSpec::pinned(&top, lambda)];
    let mut engine = CoupledEngine::new(ClockRealization::new(seed), specs);
    let mut watch = WindowWatch { window_end, changes: 0, contacts: 0, max_contacts: 0 };
    let weights = AreaWeights::sine(length);
    let (mut censored_phi, mut free_phi) = (Vec::with_capacity(grid.len()), Vec::with_capacity(grid.len()));
    for &t in grid {
        engine.advance(t, false, &mut watch);
        censored_phi.push(weights.area(engine.heights(0)));
        free_phi.push(weights.area(engine.heights(1)));
    }
    if engine.now() < window_end {
        engine.advance(window_end, false, &mut watch);
    }
    WedgeReplica { changes: watch.changes, max_contacts: watch.max_contacts, censored_phi, free_phi }
}

fn statistic(grid: &[f64], samples: &[Vec<f64>], mu_sorted: &[f64], k: usize) -> Vec<StatisticPoint> {
    let half = ks_half_width(samples.len(), mu_sorted.len());
    grid.iter()
        .enumerate()
        .map(|(g, &t)| {
            let mut s: Vec<f64> = samples.iter().map(|r| r[g]).collect();
            s.sort_by(f64::total_cmp);
            let th = pooled_quantiles(&s, mu_sorted, k);
            StatisticPoint { t, d: threshold_distance(&s, mu_sorted, &th).0, ci: half }
        })
        .collect()
}

/// Exact `t ↦ ‖P^{∧,𝒞}_t − μ‖` and `‖P^∧_t − μ‖` with `𝒞 = G_L` on `[0, until)`.
pub fn exact_wedge(params: &ModelParams, until: f64, grid: &[f64]) -> Result<ExactWedge, ExperimentError> {
    let l = params.length();
    let index = StateSpaceIndex::enumerate(l)?;
    let gen = SparseGenerator::build(&index, params);
    let mu = index.equilibrium(params);
    let start = point_mass(&index, &Path::maximal(l).expect("valid L"))?;
    let sched = CensoringSchedule::window(CensoredSet::Contacts, until);
    let cens = exact_tv_curve(&gen, &start, &mu, grid, &sched, DEFAULT_TOLERANCE).points;
    let free = exact_tv_curve(&gen, &start, &mu, grid, &CensoringSchedule::none(), DEFAULT_TOLERANCE).points;
    let ok = cens.iter().zip(&free).all(|(a, b)| a.1 >= b.1 - 1e-10);
    Ok(ExactWedge { censored: cens, uncensored: free, inequality_ok: ok })
}

/// Coupled censored and uncensored `∧`-chains for every `(L, λ)` with
/// `λ ∈ (1, 2)`.
pub fn censored_wedge_protocol(
    config: &ExperimentConfig,
    cancel: Option<&AtomicBool>,
) -> Result<Vec<WedgeReport>, ExperimentError> {
    config.validate()?;
    let mut out = Vec::new();
    for lam in protocol_lambdas(config)? {
        for &l in &config.lengths {
            out.push(wedge_at(config, l, lam, cancel)?);
        }
    }
    Ok(out)
}

pub fn wedge_at(
    config: &ExperimentConfig,
    length: usize,
    lambda: f64,
    cancel: Option<&AtomicBool>,
) -> Result<WedgeReport, ExperimentError> {
    check_lambda(lambda)?;
    let params = ModelParams::new(length, lambda)?;
    let window_end = params.t_delta(config.delta / 2.0);
    let horizon = config.horizon.resolve(length);
    let grid = config.grid.resolve(length, horizon);
    let reps: Vec<WedgeReplica> = (0..config.replicas)
        .into_par_iter()
        .filter_map(|r| {
            if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                return None;
            }
            let seed = replica_seed(config.master_seed, length, lambda, r);
            Some(wedge_replica(length, lambda, seed, window_end, &grid))
        })
        .collect();
    let sampler = EquilibriumSampler::new(params);
    let weights = AreaWeights::sine(length);
    let mut rng = stream(config.master_seed, &[length as u64, float_tag(lambda), WEDGE_MU_STREAM]);
    let mut mu: Vec<f64> = (0..config.mu_samples()).map(|_| weights.area(sampler.sample(&mut rng).heights())).collect();
    mu.sort_by(f64::total_cmp);
    let cens: Vec<Vec<f64>> = reps.iter().map(|r| r.censored_phi.clone()).collect();
    let free: Vec<Vec<f64>> = reps.iter().map(|r| r.free_phi.clone()).collect();
    let exact = if length <= EXACT_WEDGE_LIMIT { Some(exact_wedge(&params, window_end, &grid)?) } else { None };
    Ok(WedgeReport {
        length,
        lambda,
        window_end,
        replicas: reps.len(),
        contact_changes_in_window: reps.iter().map(|r| r.changes).sum(),
        max_contacts_in_window: reps.iter().map(|r| r.max_contacts).max().unwrap_or(0),
        censored_statistic: if reps.is_empty() { Vec::new() } else { statistic(&grid, &cens, &mu, config.thresholds) },
        uncensored_statistic: if reps.is_empty() { Vec::new() } else { statistic(&grid, &free, &mu, config.thresholds) },
        exact,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactPoint {
    pub x: usize,
    /// `P̂[σ^∨_{s₀}(x) = 0]`.
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
    /// `μ(ξ_x = 0)`.
    pub equilibrium: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VeeReport {
    pub length: usize,
    pub lambda: f64,
    pub s0: f64,
    pub replicas: usize,
    pub m: usize,
    /// Fraction of replicas with `σ^∨_{s₀} ∈ E_{L,M}`.
    pub fraction_in_e: f64,
    pub fraction_ci: (f64, f64),
    /// `(M, fraction in E_{L,M})` for `M = 1..=L/2`.
    pub fraction_by_m: Vec<(usize, f64)>,
    pub contact_profile: Vec<ContactPoint>,
    /// Largest `P̂[σ(x) = 0]` over `x ∈ [M, L − M]`.
    pub max_contact_in_window: f64,
    /// Largest `μ(ξ_x = 0)` over the same window.
    pub max_equilibrium_contact_in_window: f64,
    /// `½ e^{−κ_L s₀} √(1/μ(∨) − 1)`: how far the law of `σ^∨_{s₀}` can be
    /// from `μ`, by the spectral bound `gap ≥ κ_L`.
    pub equilibrium_distance_bound: f64,
}

/// `σ^∨` at `s₀` for every `(L, λ)` with `λ ∈ (1, 2)`.
pub fn vee_boundary_contact_check(
    config: &ExperimentConfig,
    cancel: Option<&AtomicBool>,
) -> Result<Vec<VeeReport>, ExperimentError> {
    config.validate()?;
    let mut out = Vec::new();
    for lam in protocol_lambdas(config)? {
        for &l in &config.lengths {
            out.push(vee_at(config, l, lam, cancel)?);
        }
    }
    Ok(out)
}

pub fn vee_at(
    config: &ExperimentConfig,
    length: usize,
    lambda: f64,
    cancel: Option<&AtomicBool>,
) -> Result<VeeReport, ExperimentError> {
    check_lambda(lambda)?;
    let params = ModelParams::new(length, lambda)?;
    let s0 = config.s0(length);
    let finals: Vec<Vec<i32>> = (0..config.replicas)
        .into_par_iter()
        .filter_map(|r| {
            if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
                return None;
            }
            let seed = replica_seed(config.master_seed, length, lambda, r);
            let start = Path::minimal(length).expect("valid L").into_heights();
            let mut chain = DirectChain::new(start, RingRule::pinned(lambda), stream(seed, &[VEE_STREAM]));
            chain.advance(s0);
            Some(chain.heights().to_vec())
        })
        .collect();
    let n = finals.len();
    let z = z95();
    // M is clamped to [1, L/2], so [M, L − M] is a nonempty interior range
    let in_e = |m: usize| finals.iter().filter(|h| h[m..=length - m].iter().all(|&v| v >= 1)).count();
    let m = config.boundary_m.clamp(1, length / 2);
    let k = in_e(m);
    let frac = |k: usize| if n == 0 { f64::NAN } else { k as f64 / n as f64 };
    let contact_profile: Vec<ContactPoint> = (1..length)
        .map(|x| {
            let zeros = finals.iter().filter(|h| h[x] == 0).count();
            let (lo, hi) = wilson_interval(zeros, n, z);
            ContactPoint { x, p_hat: frac(zeros), lo, hi, equilibrium: contact_probability(&params, x) }
        })
        .collect();
    let window = |p: &ContactPoint| p.x >= m && p.x <= length - m;
    let max_hat = contact_profile.iter().filter(|p| window(p)).map(|p| p.p_hat).fold(0.0, f64::max);
    let max_eq = contact_profile.iter().filter(|p| window(p)).map(|p| p.equilibrium).fold(0.0, f64::max);
    let log_mu_vee = (length as f64 / 2.0 - 1.0) * lambda.ln() - log_partition_at(length, lambda);
    let log_var = (-log_mu_vee).exp_m1().ln();
    let bound = (0.5f64.ln() - params.kappa() * s0 + 0.5 * log_var).exp();
    Ok(VeeReport {
        length,
        lambda,
        s0,
        replicas: n,
        m,
        fraction_in_e: frac(k),
        fraction_ci: wilson_interval(k, n, z),
        fraction_by_m: (1..=length / 2).map(|mm| (mm, frac(in_e(mm)))).collect(),
        contact_profile,
        max_contact_in_window: max_hat,
        max_equilibrium_contact_in_window: max_eq,
        equilibrium_distance_bound: bound,
    })
}
