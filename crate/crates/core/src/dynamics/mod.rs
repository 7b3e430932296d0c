//! The corner-flip dynamics: single chains, the grand coupling on a shared
//! clock realization, and censoring.

mod censoring;
mod clocks;
mod direct;
mod engine;
mod rules;

use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

pub use censoring::{green_squares, CensoredSet, CensoringSchedule, ScheduleError};
pub use clocks::{ClockRealization, Ring};
pub use direct::DirectChain;
pub use engine::{ChainSpec, CoupledEngine, Observer, StopReason};
pub use rules::{
    apply_clock_event, flip, rate, theta_contains, theta_sites, ChainState, ClockSite, Direction,
    RingRule,
};

use crate::rng::stream;
use crate::statespace::{sample_equilibrium, ModelParams, Path};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("all chains of a coupling must share L (got {0} and {1})")]
    MixedLength(usize, usize),
    #[error("chain index {0} out of range")]
    BadChain(usize),
    #[error("horizon must be finite and ≥ 0")]
    BadHorizon,
}

/// One accepted flip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub time: f64,
    pub chain: usize,
    pub x: usize,
    pub new_height: i32,
}

/// Collects every accepted flip.
#[derive(Debug, Default)]
pub struct TransitionRecorder {
    pub transitions: Vec<Transition>,
}

impl Observer for TransitionRecorder {
    fn on_transition(&mut self, t: f64, chain: usize, x: usize, _old: i32, new: i32) {
        self.transitions.push(Transition { time: t, chain, x, new_height: new });
    }
}

/// Writes the event log as CSV: `t,x,z,dir,accepted,chain_id`.
pub struct EventLog<W: Write> {
    out: W,
    error: Option<std::io::Error>,
}

impl<W: Write> EventLog<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "t,x,z,dir,accepted,chain_id")?;
        Ok(Self { out, error: None })
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> Observer for EventLog<W> {
    fn on_attempt(&mut self, t: f64, site: ClockSite, chain: usize, accepted: bool) {
        if self.error.is_none() {
            if let Err(e) = writeln!(
                self.out,
                "{t:.17e},{},{},{},{},{chain}",
                site.x,
                site.z,
                site.direction.as_str(),
                accepted as u8
            ) {
                self.error = Some(e);
            }
        }
    }
}

/// Fan out callbacks to two observers.
pub struct Both<'a, A: Observer + ?Sized, B: Observer + ?Sized>(pub &'a mut A, pub &'a mut B);

impl<A: Observer + ?Sized, B: Observer + ?Sized> Observer for Both<'_, A, B> {
    fn on_attempt(&mut self, t: f64, site: ClockSite, chain: usize, accepted: bool) {
        self.0.on_attempt(t, site, chain, accepted);
        self.1.on_attempt(t, site, chain, accepted);
    }
    fn on_transition(&mut self, t: f64, chain: usize, x: usize, old: i32, new: i32) {
        self.0.on_transition(t, chain, x, old, new);
        self.1.on_transition(t, chain, x, old, new);
    }
    fn after_event(&mut self, t: f64, x: usize, engine: &CoupledEngine) -> bool {
        let a = self.0.after_event(t, x, engine);
        let b = self.1.after_event(t, x, engine);
        a && b
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_state: ChainState,
    /// `(t, σ_t)` at each requested snapshot time up to the horizon.
    pub snapshots: Vec<(f64, Path)>,
    pub events: u64,
}

/// Run one chain to `horizon`, reporting to `observer` and taking snapshots
/// at the requested times (those beyond the horizon are ignored).
pub fn simulate(
    initial: &Path,
    params: &ModelParams,
    horizon: f64,
    clocks: ClockRealization,
    schedule: &CensoringSchedule,
    observer: &mut dyn Observer,
    snapshot_times: &[f64],
) -> Result<Trajectory, DynamicsError> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(DynamicsError::BadHorizon);
    }
    if initial.length() != params.length() {
        return Err(DynamicsError::MixedLength(initial.length(), params.length()));
    }
    let spec = ChainSpec::pinned(initial, params.lambda()).with_schedule(Arc::new(schedule.clone()));
    let mut engine = CoupledEngine::new(clocks, vec![spec]);
    let mut times: Vec<f64> = snapshot_times.iter().copied().filter(|&t| t <= horizon).collect();
    times.sort_by(f64::total_cmp);
    let mut snapshots = Vec::with_capacity(times.len());
    for t in times {
        engine.advance(t, false, observer);
        snapshots.push((t, engine.path(0)));
    }
    engine.advance(horizon, false, observer);
    Ok(Trajectory {
        final_state: ChainState { path: engine.path(0), time: horizon, params: *params },
        snapshots,
        events: engine.events(),
    })
}

/// Result of a grand coupling run.
#[derive(Debug, Clone)]
pub struct CouplingReport {
    pub finals: Vec<Path>,
    /// First meeting time of each designated pair, `None` if still apart at the horizon.
    pub coalescence: Vec<((usize, usize), Option<f64>)>,
    /// Ordered pairs `(lo, hi)` whose order `σ^lo ≤ σ^hi` was monitored.
    pub monitored: Vec<(usize, usize)>,
    pub order_checks: u64,
    pub order_violations: u64,
    pub events: u64,
}

/// Checks, after every event, the orders the grand coupling must preserve.
pub struct OrderMonitor {
    relations: Vec<(usize, usize)>,
    pub checks: u64,
    pub violations: u64,
}

impl OrderMonitor {
    /// Relations implied by the initial data: `ξ ≤ ξ′` at equal `λ` gives
    /// `σ^ξ ≤ σ^ξ′`; equal `ξ` with `λ ≤ λ′` gives `σ^{λ′} ≤ σ^λ`.
    pub fn from_initials(initials: &[(Path, f64)]) -> Self {
        let mut relations = Vec::new();
        for (i, (pi, li)) in initials.iter().enumerate() {
            for (j, (pj, lj)) in initials.iter().enumerate() {
                if i == j {
                    continue;
                }
                if li == lj && pi != pj && pi.leq(pj).unwrap_or(false) {
                    relations.push((i, j));
                }
                if pi == pj && li < lj {
                    relations.push((j, i));
                }
            }
        }
        Self::new(relations)
    }

    pub fn new(relations: Vec<(usize, usize)>) -> Self {
        Self { relations, checks: 0, violations: 0 }
    }

    pub fn relations(&self) -> &[(usize, usize)] {
        &self.relations
    }

    /// Full comparison of every monitored relation.
    pub fn check_all(&mut self, engine: &CoupledEngine) {
        for &(lo, hi) in &self.relations {
            self.checks += 1;
            let (a, b) = (engine.heights(lo), engine.heights(hi));
            if a.iter().zip(b).any(|(u, v)| u > v) {
                self.violations += 1;
            }
        }
    }
}

impl Observer for OrderMonitor {
    fn after_event(&mut self, _t: f64, x: usize, engine: &CoupledEngine) -> bool {
        // Only column x moved, so the order elsewhere is inherited.
        for &(lo, hi) in &self.relations {
            self.checks += 1;
            if engine.heights(lo)[x] > engine.heights(hi)[x] {
                self.violations += 1;
            }
        }
        true
    }
}

/// Run all `initials` on one clock realization, monitoring the implied
/// orders at every event and recording when designated pairs meet.
pub fn grand_coupling(
    initials: &[(Path, f64)],
    horizon: f64,
    master_seed: u64,
    schedule: &CensoringSchedule,
    pairs: &[(usize, usize)],
) -> Result<CouplingReport, DynamicsError> {
    if initials.is_empty() {
        return Err(DynamicsError::BadChain(0));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(DynamicsError::BadHorizon);
    }
    let l0 = initials[0].0.length();
    if let Some((p, _)) = initials.iter().find(|(p, _)| p.length() != l0) {
        return Err(DynamicsError::MixedLength(l0, p.length()));
    }
    if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| a >= initials.len() || b >= initials.len()) {
        return Err(DynamicsError::BadChain(a.max(b)));
    }
    let schedule = Arc::new(schedule.clone());
    let specs = initials
        .iter()
        .map(|(p, lam)| ChainSpec::pinned(p, *lam).with_schedule(schedule.clone()))
        .collect();
    let mut engine = CoupledEngine::new(ClockRealization::new(master_seed), specs);
    let ids: Vec<usize> = pairs.iter().map(|&(a, b)| engine.track_pair(a, b)).collect();
    let mut monitor = OrderMonitor::from_initials(initials);
    monitor.check_all(&engine);
    engine.advance(horizon, false, &mut monitor);
    monitor.check_all(&engine);
    Ok(CouplingReport {
        finals: (0..initials.len()).map(|c| engine.path(c)).collect(),
        coalescence: pairs.iter().zip(&ids).map(|(&pr, &id)| (pr, engine.pair_time(id))).collect(),
        monitored: monitor.relations().to_vec(),
        order_checks: monitor.checks,
        order_violations: monitor.violations,
        events: engine.events(),
    })
}

/// Meeting times of the extremal chains with a chain started at equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoalescenceOutcome {
    /// `τ₁`: `σ^∧` meets `σ^μ`.
    pub tau1: Option<f64>,
    /// `τ₂`: `σ^∨` meets `σ^μ`.
    pub tau2: Option<f64>,
    /// `τ = max(τ₁, τ₂)`; `None` means censored at the horizon.
    pub tau: Option<f64>,
    pub events: u64,
}

impl CoalescenceOutcome {
    pub fn censored(&self) -> bool {
        self.tau.is_none()
    }
}

/// Label of the sub-stream that draws the equilibrium start of `σ^μ`.
pub const EQUILIBRIUM_STREAM: u64 = 0x4D55_5354_4152_54;

/// Run `{∧, ∨, μ}` in one grand coupling until both extremal chains have met
/// the equilibrium chain, or until `horizon`.
pub fn coalescence_time(master_seed: u64, params: &ModelParams, horizon: f64) -> CoalescenceOutcome {
    let l = params.length();
    let mu_start = sample_equilibrium(params, &mut stream(master_seed, &[EQUILIBRIUM_STREAM]));
    let lam = params.lambda();
    let specs = vec![
        ChainSpec::pinned(&Path::maximal(l).expect("valid L"), lam),
        ChainSpec::pinned(&Path::minimal(l).expect("valid L"), lam),
        ChainSpec::pinned(&mu_start, lam),
    ];
    let mut engine = CoupledEngine::new(ClockRealization::new(master_seed), specs);
    let p1 = engine.track_pair(0, 2);
    let p2 = engine.track_pair(1, 2);
    engine.enable_aliasing();
    engine.advance(horizon, true, &mut ());
    let (tau1, tau2) = (engine.pair_time(p1), engine.pair_time(p2));
    let tau = match (tau1, tau2) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    CoalescenceOutcome { tau1, tau2, tau, events: engine.events() }
}

/// Replays every stream of `sites × {up, down}` over `[0, horizon]` in global
/// time order and applies the update rules to every chain, without any
/// relevance bookkeeping. The reference against which the event-driven
/// engine is checked.
pub fn brute_force_transitions(
    clocks: ClockRealization,
    specs: &[ChainSpec],
    sites: &[(usize, i32)],
    horizon: f64,
) -> Vec<Transition> {
    let mut rings: Vec<(f64, usize, i32, Direction, Ring)> = Vec::new();
    let last_block = horizon.floor() as u64;
    for &(x, z) in sites {
        for dir in [Direction::Up, Direction::Down] {
            let site = ClockSite::new(x, z, dir);
            for b in 0..=last_block {
                for r in clocks.rings_in_block(site, b) {
                    if r.time <= horizon {
                        rings.push((r.time, x, z, dir, r));
                    }
                }
            }
        }
    }
    rings.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    let mut states: Vec<Vec<i32>> = specs.iter().map(|s| s.initial.clone()).collect();
    let mut out = Vec::new();
    for (t, x, z, dir, r) in rings {
        let site = ClockSite::new(x, z, dir);
        let coin = clocks.coin(site, &r);
        for (c, spec) in specs.iter().enumerate() {
            if spec.schedule.as_ref().is_some_and(|s| s.contains(t, x, z)) {
                continue;
            }
            if let Some(next) = rules::apply_ring_rules(&states[c], site, coin, &spec.rule) {
                out.push(Transition { time: t, chain: c, x, new_height: next[x] });
                states[c] = next;
            }
        }
    }
    out
}

/// The same run through the event-driven engine.
pub fn lazy_transitions(clocks: ClockRealization, specs: &[ChainSpec], horizon: f64) -> Vec<Transition> {
    let mut engine = CoupledEngine::new(clocks, specs.to_vec());
    let mut rec = TransitionRecorder::default();
    engine.advance(horizon, false, &mut rec);
    rec.transitions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statespace::enumerate_paths;

    fn params(l: usize, lam: f64) -> ModelParams {
        ModelParams::new(l, lam).unwrap()
    }

    #[test]
    fn zero_horizon_is_the_initial_state() {
        let p = Path::maximal(8).unwrap();
        let tr = simulate(&p, &params(8, 1.0), 0.0, ClockRealization::new(1), &CensoringSchedule::none(), &mut (), &[0.0])
            .unwrap();
        assert_eq!(tr.final_state.path, p);
        assert_eq!(tr.snapshots, vec![(0.0, p)]);
    }

    #[test]
    fn full_censoring_freezes_the_chain() {
        let p = Path::maximal(12).unwrap();
        let mut rec = TransitionRecorder::default();
        let tr = simulate(
            &p,
            &params(12, 1.0),
            500.0,
            ClockRealization::new(2),
            &CensoringSchedule::always(CensoredSet::All),
            &mut rec,
            &[],
        )
        .unwrap();
        assert_eq!(tr.final_state.path, p);
        assert!(rec.transitions.is_empty());
    }

    struct Occupancy {
        target: Vec<i32>,
        current: Vec<i32>,
        last: f64,
        inside: f64,
    }

    impl Observer for Occupancy {
        fn on_transition(&mut self, t: f64, _c: usize, x: usize, _old: i32, new: i32) {
            if self.current == self.target {
                self.inside += t - self.last;
            }
            self.last = t;
            self.current[x] = new;
        }
    }

    #[test]
    fn ergodic_average_at_length_four() {
        let target = vec![0, 1, 0, 1, 0];
        let start = Path::maximal(4).unwrap();
        let mut occ = Occupancy { target: target.clone(), current: start.heights().to_vec(), last: 0.0, inside: 0.0 };
        let horizon = 1e4;
        simulate(&start, &params(4, 1.0), horizon, ClockRealization::new(5), &CensoringSchedule::none(), &mut occ, &[])
            .unwrap();
        if occ.current == target {
            occ.inside += horizon - occ.last;
        }
        let frac = occ.inside / horizon;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn lazy_engine_matches_brute_force() {
        for l in [6, 8, 10] {
            let paths = enumerate_paths(l);
            for seed in 0..6u64 {
                let mu = &paths[(seed as usize * 7) % paths.len()];
                let specs = vec![
                    ChainSpec::pinned(&Path::maximal(l).unwrap(), 1.3),
                    ChainSpec::pinned(&Path::minimal(l).unwrap(), 1.3),
                    ChainSpec::pinned(mu, 0.4),
                    ChainSpec::pinned(mu, 1.3).with_schedule(Arc::new(CensoringSchedule::window(CensoredSet::Contacts, 30.0))),
                ];
                let clocks = ClockRealization::new(seed);
                let lazy = lazy_transitions(clocks, &specs, 100.0);
                let brute = brute_force_transitions(clocks, &specs, &theta_sites(l), 100.0);
                assert!(!lazy.is_empty());
                assert_eq!(lazy, brute, "L={l} seed={seed}");
            }
        }
    }

    #[test]
    fn coupling_preserves_order_and_reverses_in_lambda() {
        let l = 16;
        let top = Path::maximal(l).unwrap();
        let bottom = Path::minimal(l).unwrap();
        for seed in 0..20 {
            let rep = grand_coupling(
                &[(bottom.clone(), 1.0), (top.clone(), 1.0), (top.clone(), 0.5), (top.clone(), 1.5)],
                300.0,
                seed,
                &CensoringSchedule::none(),
                &[(0, 1)],
            )
            .unwrap();
            assert_eq!(rep.order_violations, 0);
            assert!(rep.monitored.contains(&(0, 1)));
            assert!(rep.monitored.contains(&(3, 2)));
            assert!(rep.order_checks > 0);
        }
    }

    #[test]
    fn coupling_rejects_mixed_lengths() {
        let r = grand_coupling(
            &[(Path::maximal(4).unwrap(), 1.0), (Path::maximal(6).unwrap(), 1.0)],
            1.0,
            0,
            &CensoringSchedule::none(),
            &[],
        );
        assert!(matches!(r, Err(DynamicsError::MixedLength(4, 6))));
    }

    #[test]
    fn coalescence_identities() {
        let out = coalescence_time(3, &params(2, 1.0), 10.0);
        assert_eq!(out.tau, Some(0.0));
        for seed in 0..50 {
            let out = coalescence_time(seed, &params(12, 1.0), 1e6);
            let (a, b, t) = (out.tau1.unwrap(), out.tau2.unwrap(), out.tau.unwrap());
            assert_eq!(t, a.max(b));
        }
        let out = coalescence_time(1, &params(40, 1.0), 1.0);
        assert!(out.censored());
    }

    #[test]
    fn deterministic_replays() {
        let p = params(20, 1.2);
        let a = coalescence_time(77, &p, 1e6);
        let b = coalescence_time(77, &p, 1e6);
        assert_eq!(a, b);
    }

    #[test]
    fn event_log_format() {
        let p = Path::maximal(6).unwrap();
        let mut log = EventLog::new(Vec::new()).unwrap();
        simulate(&p, &params(6, 1.0), 5.0, ClockRealization::new(4), &CensoringSchedule::none(), &mut log, &[]).unwrap();
        let text = String::from_utf8(log.finish().unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,x,z,dir,accepted,chain_id"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 6);
        assert!(first[3] == "up" || first[3] == "down");
    }
}
