//! The no-wall comparison system: ±1 bridges pinned at height `m` at both
//! ends, every corner flipping at rate 1/2, and the three-chain sandwich
//! `σ^{∧̄,0} ≥ η^{∧̄} ≥ η^{U_L}` on one clock realization.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use statrs::function::factorial::ln_binomial;

use super::ExperimentError;
use crate::dynamics::{Both, ChainSpec, ClockRealization, CoupledEngine, Observer, OrderMonitor, RingRule};
use crate::rng::stream;
use crate::statespace::{ModelParams, Path};

const UNIFORM_STREAM: u64 = 0x554E_4946;

/// `m = 2⌈L^{1/2} (log L)² / 2⌉`.
pub fn sep_height(length: usize) -> i32 {
    let l = length as f64;
    2 * (l.sqrt() * l.ln().powi(2) / 2.0).ceil() as i32
}

/// A ±1 bridge of length `L` from `m` to `m`, with no positivity constraint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SepState {
    heights: Vec<i32>,
}

impl SepState {
    pub fn new(heights: Vec<i32>, m: i32) -> Result<Self, ExperimentError> {
        let l = heights.len().saturating_sub(1);
        if l < 2 || l % 2 == 1 {
            return Err(ExperimentError::BadLength(l));
        }
        if heights[0] != m || heights[l] != m {
            return Err(ExperimentError::BadBridge("endpoints must equal m".into()));
        }
        if heights.windows(2).any(|w| (w[0] - w[1]).abs() != 1) {
            return Err(ExperimentError::BadBridge("steps must be ±1".into()));
        }
        Ok(Self { heights })
    }

    /// `∧̄ = ∧ + m`.
    pub fn lifted_maximal(length: usize, m: i32) -> Result<Self, ExperimentError> {
        let top = Path::maximal(length).map_err(|_| ExperimentError::BadLength(length))?;
        Ok(Self { heights: top.heights().iter().map(|h| h + m).collect() })
    }

    pub fn length(&self) -> usize {
        self.heights.len() - 1
    }

    pub fn heights(&self) -> &[i32] {
        &self.heights
    }

    pub fn min_height(&self) -> i32 {
        *self.heights.iter().min().unwrap()
    }
}

/// Uniform draw from `𝒮_L` via a random permutation of `L/2` up-steps and `L/2` down-steps.
pub fn sample_uniform_bridge<R: Rng + ?Sized>(length: usize, m: i32, rng: &mut R) -> SepState {
    assert!(length >= 2 && length % 2 == 0, "L must be even and ≥ 2");
    let mut steps: Vec<i32> = (0..length).map(|i| if i < length / 2 { 1 } else { -1 }).collect();
    steps.shuffle(rng);
    let mut heights = Vec::with_capacity(length + 1);
    heights.push(m);
    for s in steps {
        heights.push(heights.last().unwrap() + s);
    }
    SepState { heights }
}

/// `U_L(min_x ζ_x ≤ 0)`. By reflection at level 0 the bridges from `m` to
/// `m` that touch 0 are in bijection with paths from `m` to `−m`, so the
/// probability is `C(L, L/2 + m) / C(L, L/2)`.
pub fn bridge_min_tail_exact(length: usize, m: i32) -> f64 {
    assert!(length % 2 == 0, "L must be even");
    if m <= 0 {
        return 1.0;
    }
    let m = m as usize;
    if length / 2 + m > length {
        return 0.0;
    }
    (ln_binomial(length as u64, (length / 2 + m) as u64) - ln_binomial(length as u64, (length / 2) as u64)).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct SepTrajectory {
    pub m: i32,
    pub final_state: SepState,
    /// Lowest height reached at any time in `[0, horizon]`.
    pub running_min: i32,
    pub events: u64,
}

struct MinWatch(i32);

impl Observer for MinWatch {
    fn on_transition(&mut self, _t: f64, _chain: usize, _x: usize, _old: i32, new: i32) {
        self.0 = self.0.min(new);
    }
}

/// The no-wall chain from `∧̄` with `m = sep_height(L)`.
pub fn sep_dynamics(length: usize, horizon: f64, master_seed: u64) -> Result<SepTrajectory, ExperimentError> {
    let m = sep_height(length);
    let start = SepState::lifted_maximal(length, m)?;
    let mut engine =
        CoupledEngine::new(ClockRealization::new(master_seed), vec![ChainSpec::free(start.heights.clone())]);
    let mut watch = MinWatch(start.min_height());
    engine.advance(horizon, false, &mut watch);
    Ok(SepTrajectory {
        m,
        final_state: SepState { heights: engine.heights(0).to_vec() },
        running_min: watch.0,
        events: engine.events(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub length: usize,
    pub m: i32,
    pub horizon: f64,
    pub checks: u64,
    pub violations: u64,
    /// First time the walled chain and the free chain from `∧̄` differ.
    pub first_split: Option<f64>,
    /// Lowest height reached by `η^{U_L}`.
    pub uniform_running_min: i32,
    pub events: u64,
}

struct SplitWatch {
    first: Option<f64>,
    min_uniform: i32,
}

impl Observer for SplitWatch {
    fn on_transition(&mut self, _t: f64, chain: usize, _x: usize, _old: i32, new: i32) {
        if chain == 2 {
            self.min_uniform = self.min_uniform.min(new);
        }
    }
    fn after_event(&mut self, t: f64, x: usize, engine: &CoupledEngine) -> bool {
        if self.first.is_none() && engine.heights(0)[x] != engine.heights(1)[x] {
            self.first = Some(t);
        }
        true
    }
}

/// Couple `σ^{∧̄,0}` (wall at 0, `λ = 0`), `η^{∧̄}` and `η^{U_L}` on one
/// realization over `Θ′`, checking `σ^{∧̄,0} ≥ η^{∧̄} ≥ η^{U_L}` after every event.
pub fn three_chain_sandwich(
    length: usize,
    m: i32,
    horizon: f64,
    master_seed: u64,
) -> Result<SandwichReport, ExperimentError> {
    if m < 0 {
        return Err(ExperimentError::BadBridge("m must be ≥ 0".into()));
    }
    ModelParams::new(length, 0.0)?;
    let top = SepState::lifted_maximal(length, m)?;
    let uniform = sample_uniform_bridge(length, m, &mut stream(master_seed, &[UNIFORM_STREAM]));
    let specs = vec![
        ChainSpec { initial: top.heights.clone(), rule: RingRule::pinned(0.0), schedule: None },
        ChainSpec::free(top.heights.clone()),
        ChainSpec::free(uniform.heights.clone()),
    ];
    let mut engine = CoupledEngine::new(ClockRealization::new(master_seed), specs);
    let mut monitor = OrderMonitor::new(vec![(1, 0), (2, 1)]);
    let mut watch = SplitWatch { first: None, min_uniform: uniform.min_height() };
    monitor.check_all(&engine);
    engine.advance(horizon, false, &mut Both(&mut monitor, &mut watch));
    monitor.check_all(&engine);
    Ok(SandwichReport {
        length,
        m,
        horizon,
        checks: monitor.checks,
        violations: monitor.violations,
        first_split: watch.first,
        uniform_running_min: watch.min_uniform,
        events: engine.events(),
    })
}
