//! Replica farms for the coalescence time and the two TV estimates.
//!
//! Each replica runs `{∧, ∨, μ}` on one clock realization until both
//! extremal chains have met the equilibrium chain (this gives `τ₁, τ₂, τ`),
//! and, separately, an uncoupled `∧` chain whose `Φ` is recorded on the time
//! grid. Only the law of `σ^∧_t` enters the lower bound, so that chain does
//! not need the shared clocks.

use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use super::stats::{
    bootstrap_interval, ks_half_width, pooled_quantiles, survival_crossing, threshold_distance,
    wilson_interval, z95,
};
use super::{ExperimentConfig, ExperimentError};
use crate::dynamics::{coalescence_time, DirectChain, RingRule};
use crate::observables::AreaWeights;
use crate::rng::{derive_seed, float_tag, stream};
use crate::statespace::{EquilibriumSampler, ModelParams, Path};

const TOP_STREAM: u64 = 0x544F_50;
const MU_STREAM: u64 = 0x4D55_4841_54;
const BOOT_STREAM: u64 = 0x424F_4F54;

/// Seed of replica `r` at `(L, λ)`.
pub fn replica_seed(master: u64, length: usize, lambda: f64, replica: usize) -> u64 {
    derive_seed(master, &[length as u64, float_tag(lambda), replica as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaOutcome {
    pub replica: usize,
    pub tau1: Option<f64>,
    pub tau2: Option<f64>,
    /// `max(τ₁, τ₂)`; `None` when right-censored at the horizon.
    pub tau: Option<f64>,
    pub events: u64,
    /// `Φ(σ^∧_t)` on the grid (empty when not tracked).
    pub phi_top: Vec<f64>,
}

/// All replicas at one `(L, λ)`.
#[derive(Debug, Clone, Serialize)]
pub struct ReplicaFarm {
    pub length: usize,
    pub lambda: f64,
    pub horizon: f64,
    pub grid: Vec<f64>,
    pub requested: usize,
    pub replicas: Vec<ReplicaOutcome>,
    /// `Φ` of exact equilibrium draws.
    pub mu_phi: Vec<f64>,
    pub master_seed: u64,
}

fn cancelled(flag: Option<&AtomicBool>) -> bool {
    flag.is_some_and(|f| f.load(Ordering::Relaxed))
}

fn run_replica(params: &ModelParams, seed: u64, horizon: f64, grid: &[f64], replica: usize) -> ReplicaOutcome {
    let out = coalescence_time(seed, params, horizon);
    let mut phi_top = Vec::with_capacity(grid.len());
    if !grid.is_empty() {
        let l = params.length();
        let weights = AreaWeights::sine(l);
        let start = Path::maximal(l).expect("valid L").into_heights();
        let mut chain = DirectChain::new(start, RingRule::pinned(params.lambda()), stream(seed, &[TOP_STREAM]));
        for &t in grid {
            chain.advance(t);
            phi_top.push(weights.area(chain.heights()));
        }
    }
    ReplicaOutcome { replica, tau1: out.tau1, tau2: out.tau2, tau: out.tau, events: out.events, phi_top }
}

impl ReplicaFarm {
    /// Run the farm. Replicas not started before `cancel` is raised are
    /// missing from the result (`replicas.len() < requested`).
    pub fn run(
        config: &ExperimentConfig,
        length: usize,
        lambda: f64,
        track_phi: bool,
        cancel: Option<&AtomicBool>,
    ) -> Result<Self, ExperimentError> {
        let params = ModelParams::new(length, lambda)?;
        let horizon = config.horizon.resolve(length);
        let grid = config.grid.resolve(length, horizon);
        let master = config.master_seed;
        let tracked: &[f64] = if track_phi { &grid } else { &[] };
        let replicas: Vec<ReplicaOutcome> = (0..config.replicas)
            .into_par_iter()
            .map(|r| {
                if cancelled(cancel) {
                    return None;
                }
                Some(run_replica(&params, replica_seed(master, length, lambda, r), horizon, tracked, r))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect();
        let mu_phi = if track_phi {
            let sampler = EquilibriumSampler::new(params);
            let weights = AreaWeights::sine(length);
            let mut rng = stream(master, &[length as u64, float_tag(lambda), MU_STREAM]);
            (0..config.mu_samples()).map(|_| weights.area(sampler.sample(&mut rng).heights())).collect()
        } else {
            Vec::new()
        };
        Ok(Self { length, lambda, horizon, grid, requested: config.replicas, replicas, mu_phi, master_seed: master })
    }

    pub fn is_complete(&self) -> bool {
        self.replicas.len() == self.requested
    }

    pub fn taus(&self) -> Vec<Option<f64>> {
        self.replicas.iter().map(|r| r.tau).collect()
    }

    /// `L² log L / π²`.
    pub fn scale(&self) -> f64 {
        crate::statespace::mixing_scale(self.length)
    }

    pub fn tau_summary(&self, delta: f64) -> TauSummary {
        let n = self.replicas.len();
        let t_delta = (1.0 + delta) * self.scale();
        let censored = self.replicas.iter().filter(|r| r.tau.is_none()).count();
        let within = self.replicas.iter().filter(|r| r.tau.is_some_and(|t| t <= t_delta)).count();
        let taus = self.taus();
        let quantiles = [0.1, 0.25, 0.5, 0.75, 0.9]
            .into_iter()
            .map(|q| (q, if n == 0 { None } else { survival_crossing(&taus, 1.0 - q) }))
            .collect();
        TauSummary {
            length: self.length,
            lambda: self.lambda,
            replicas: n,
            censored,
            horizon: self.horizon,
            t_delta,
            fraction_within_t_delta: if n == 0 { f64::NAN } else { within as f64 / n as f64 },
            fraction_ci: wilson_interval(within, n, z95()),
            quantiles,
            mean_events: self.replicas.iter().map(|r| r.events as f64).sum::<f64>() / n.max(1) as f64,
        }
    }

    /// `d_upper(t) = P̂[τ > t]` with Wilson bands. Censored replicas count as `τ > t`.
    pub fn upper_curve(&self) -> Vec<UpperPoint> {
        let n = self.replicas.len();
        let z = z95();
        self.grid
            .iter()
            .map(|&t| {
                let k = self.replicas.iter().filter(|r| r.tau.is_none_or(|tau| tau > t)).count();
                let (lo, hi) = wilson_interval(k, n, z);
                UpperPoint { t, d: if n == 0 { f64::NAN } else { k as f64 / n as f64 }, lo, hi }
            })
            .collect()
    }

    /// `d_lower(t) = sup_c |P̂(Φ(σ^∧_t) > c) − μ̂(Φ > c)|` over `k` pooled quantiles.
    pub fn lower_curve(&self, k: usize) -> Vec<LowerPoint> {
        let n = self.replicas.len();
        if n == 0 || self.mu_phi.is_empty() || self.replicas[0].phi_top.len() != self.grid.len() {
            return Vec::new();
        }
        let mut mu = self.mu_phi.clone();
        mu.sort_by(f64::total_cmp);
        let half = ks_half_width(n, mu.len());
        let norm = (self.length as f64).powf(1.5);
        self.grid
            .iter()
            .enumerate()
            .map(|(g, &t)| {
                let mut top: Vec<f64> = self.replicas.iter().map(|r| r.phi_top[g]).collect();
                top.sort_by(f64::total_cmp);
                let thresholds = pooled_quantiles(&top, &mu, k);
                let (d, c) = threshold_distance(&top, &mu, &thresholds);
                LowerPoint { t, d, ci: half, threshold: c / norm }
            })
            .collect()
    }

    /// Rows of `mixing_curve.csv`.
    pub fn mixing_curve(&self, k: usize) -> Vec<MixingCurveRow> {
        let lower = self.lower_curve(k);
        self.upper_curve()
            .into_iter()
            .enumerate()
            .map(|(g, u)| {
                let (dl, dl_ci) = lower.get(g).map_or((f64::NAN, f64::NAN), |p| (p.d, p.ci));
                MixingCurveRow {
                    length: self.length,
                    lambda: self.lambda,
                    t: u.t,
                    d_upper: u.d,
                    d_upper_ci: (u.d - u.lo).max(u.hi - u.d),
                    d_lower: dl,
                    d_lower_ci: dl_ci,
                }
            })
            .collect()
    }

    /// Mixing-time estimates for each `ε`.
    pub fn cutoff(&self, epsilons: &[f64], k: usize, resamples: usize) -> Vec<CutoffRow> {
        let taus = self.taus();
        let scale = self.scale();
        let lower = self.lower_curve(k);
        let mut rng = stream(self.master_seed, &[self.length as u64, float_tag(self.lambda), BOOT_STREAM]);
        epsilons
            .iter()
            .map(|&eps| {
                let upper = survival_crossing(&taus, eps);
                let mirror = survival_crossing(&taus, 1.0 - eps);
                let ratio = match (upper, mirror) {
                    (Some(a), Some(b)) if b > 0.0 => Some(a / b),
                    _ => None,
                };
                let upper_ci = bootstrap_interval(&taus, resamples, &mut rng, |s| survival_crossing(s, eps));
                let ratio_ci = bootstrap_interval(&taus, resamples, &mut rng, |s| {
                    match (survival_crossing(s, eps), survival_crossing(s, 1.0 - eps)) {
                        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
                        _ => None,
                    }
                });
                let last_above = lower.iter().rposition(|p| p.d > eps);
                let lower_t = last_above.map(|i| lower[i].t);
                let mut warnings = Vec::new();
                if upper.is_none() {
                    warnings.push(format!("survival above {eps} at the horizon; upper estimate is right-censored"));
                }
                if let Some(i) = last_above {
                    match lower.get(i + 1) {
                        None => warnings.push("d_lower exceeds ε at the last grid point; lower bracket is open".into()),
                        Some(next) => {
                            let width = next.t - lower[i].t;
                            if width > 0.1 * lower[i].t.max(f64::MIN_POSITIVE) {
                                warnings.push(format!(
                                    "grid too coarse: lower crossing bracketed in [{}, {}]",
                                    lower[i].t, next.t
                                ));
                            }
                        }
                    }
                }
                let norm = |v: Option<f64>| v.map(|t| t / scale);
                CutoffRow {
                    length: self.length,
                    lambda: self.lambda,
                    eps,
                    t_hat_upper: upper,
                    t_hat_lower: lower_t,
                    normalized_location: norm(upper),
                    normalized_lower: norm(lower_t),
                    cutoff_ratio: ratio,
                    t_hat_upper_ci: upper_ci,
                    normalized_location_ci: upper_ci.map(|(a, b)| (a / scale, b / scale)),
                    cutoff_ratio_ci: ratio_ci,
                    warnings,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauSummary {
    pub length: usize,
    pub lambda: f64,
    pub replicas: usize,
    /// Replicas still apart at the horizon (right-censored, never dropped).
    pub censored: usize,
    pub horizon: f64,
    pub t_delta: f64,
    pub fraction_within_t_delta: f64,
    pub fraction_ci: (f64, f64),
    /// `(q, q-quantile of τ)`, `None` when the quantile lies beyond the horizon.
    pub quantiles: Vec<(f64, Option<f64>)>,
    pub mean_events: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperPoint {
    pub t: f64,
    pub d: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerPoint {
    pub t: f64,
    pub d: f64,
    /// Half-width of the 95% KS band.
    pub ci: f64,
    /// Optimising threshold divided by `L^{3/2}`.
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingCurveRow {
    pub length: usize,
    pub lambda: f64,
    pub t: f64,
    pub d_upper: f64,
    /// Larger of the two Wilson half-widths.
    pub d_upper_ci: f64,
    pub d_lower: f64,
    pub d_lower_ci: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffRow {
    pub length: usize,
    pub lambda: f64,
    pub eps: f64,
    /// First time the empirical survival of `τ` drops below `ε`.
    pub t_hat_upper: Option<f64>,
    /// Last grid time with `d_lower > ε`.
    pub t_hat_lower: Option<f64>,
    /// `π² t̂_upper / (L² log L)`.
    pub normalized_location: Option<f64>,
    pub normalized_lower: Option<f64>,
    /// `t̂_upper(ε) / t̂_upper(1 − ε)`.
    pub cutoff_ratio: Option<f64>,
    pub t_hat_upper_ci: Option<(f64, f64)>,
    pub normalized_location_ci: Option<(f64, f64)>,
    pub cutoff_ratio_ci: Option<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Everything the sweep produces at one `(L, λ)`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub farm: ReplicaFarm,
    pub summary: TauSummary,
    pub curve: Vec<MixingCurveRow>,
    pub cutoff: Vec<CutoffRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    pub complete: bool,
}

/// One farm per `(L, λ)` feeding every estimate.
pub fn mixing_sweep(config: &ExperimentConfig, cancel: Option<&AtomicBool>) -> Result<SweepResult, ExperimentError> {
    config.validate()?;
    let mut entries = Vec::new();
    let mut complete = true;
    for &l in &config.lengths {
        for &lam in &config.lambdas {
            if cancelled(cancel) {
                complete = false;
                break;
            }
            let farm = ReplicaFarm::run(config, l, lam, true, cancel)?;
            complete &= farm.is_complete();
            let summary = farm.tau_summary(config.delta);
            let curve = farm.mixing_curve(config.thresholds);
            let cutoff = farm.cutoff(&config.epsilons, config.thresholds, config.bootstrap);
            entries.push(SweepEntry { farm, summary, curve, cutoff });
        }
    }
    Ok(SweepResult { entries, complete })
}

/// Samples and summaries of `τ, τ₁, τ₂` per `(L, λ)`.
pub fn estimate_tau_distribution(config: &ExperimentConfig) -> Result<Vec<(ReplicaFarm, TauSummary)>, ExperimentError> {
    config.validate()?;
    let mut out = Vec::new();
    for &l in &config.lengths {
        for &lam in &config.lambdas {
            let farm = ReplicaFarm::run(config, l, lam, false, None)?;
            let s = farm.tau_summary(config.delta);
            out.push((farm, s));
        }
    }
    Ok(out)
}

/// `d_upper` per `(L, λ)`.
pub fn tv_upper_curve(config: &ExperimentConfig) -> Result<Vec<((usize, f64), Vec<UpperPoint>)>, ExperimentError> {
    Ok(estimate_tau_distribution(config)?
        .into_iter()
        .map(|(f, _)| ((f.length, f.lambda), f.upper_curve()))
        .collect())
}

/// `d_lower` per `(L, λ)`.
pub fn tv_lower_curve(config: &ExperimentConfig) -> Result<Vec<((usize, f64), Vec<LowerPoint>)>, ExperimentError> {
    config.validate()?;
    let mut out = Vec::new();
    for &l in &config.lengths {
        for &lam in &config.lambdas {
            let farm = ReplicaFarm::run(config, l, lam, true, None)?;
            out.push(((l, lam), farm.lower_curve(config.thresholds)));
        }
    }
    Ok(out)
}

/// Cutoff table over the configured `(L, λ, ε)`.
pub fn cutoff_sweep(config: &ExperimentConfig) -> Result<Vec<CutoffRow>, ExperimentError> {
    Ok(mixing_sweep(config, None)?.entries.into_iter().flat_map(|e| e.cutoff).collect())
}
