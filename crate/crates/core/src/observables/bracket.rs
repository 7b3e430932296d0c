//! Diagnostics of the area process `A_t` between the `∧`-chain and the
//! equilibrium chain of a grand coupling.

use serde::Serialize;

use super::{delta_min, longest_run, max_height, stopping_levels, AreaWeights};
use crate::dynamics::{CoupledEngine, Observer, RingRule};

/// Lower bound on the bracket rate and the exact rate, at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSample {
    pub t: f64,
    pub area: f64,
    pub height: i32,
    pub q: usize,
    /// `max(1, λ δ_min A / (3(1+λ) H Q))`.
    pub lower_bound: f64,
    /// `Σ_sites rate × E[ΔA²]`, the compensator density of `Σ (ΔA)²`.
    pub exact_rate: f64,
}

impl BoundSample {
    pub fn ratio(&self) -> f64 {
        self.exact_rate / self.lower_bound
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketDiagnostics {
    pub length: usize,
    pub lambda: f64,
    pub beta: f64,
    pub eta: f64,
    pub levels: usize,
    pub delta_min: f64,
    /// `t_{δ/2}`, from which the stopping times are searched.
    pub start: f64,
    pub area: f64,
    pub quadratic_variation_proxy: f64,
    pub jumps: u64,
    /// Smallest `|ΔA|` recorded.
    pub min_jump: f64,
    /// `L^{3/2 − iη}` for `i = 2, …, K`.
    pub thresholds: Vec<f64>,
    /// `𝒯_i` for `i = 2, …, K`, as they are reached.
    pub stopping_times: Vec<f64>,
    pub coalesced_at: Option<f64>,
    pub samples: Vec<BoundSample>,
    #[serde(skip)]
    weights: Vec<f64>,
}

impl BracketDiagnostics {
    pub fn new(length: usize, lambda: f64, beta: f64, eta: f64, start: f64, initial_area: f64) -> Self {
        let weights = AreaWeights::cosine(length, beta).expect("beta checked by caller").as_slice().to_vec();
        let levels = stopping_levels(eta);
        let l = length as f64;
        let thresholds = (2..=levels.max(2)).map(|i| l.powf(1.5 - i as f64 * eta)).collect();
        Self {
            length,
            lambda,
            beta,
            eta,
            levels,
            delta_min: delta_min(length, beta),
            start,
            area: initial_area,
            quadratic_variation_proxy: 0.0,
            jumps: 0,
            min_jump: f64::INFINITY,
            thresholds,
            stopping_times: Vec::new(),
            coalesced_at: if initial_area == 0.0 { Some(0.0) } else { None },
            samples: Vec::new(),
            weights,
        }
    }

    /// Apply the change of one coupled event at column `x`: `d_top`, `d_ref`
    /// are the height increments of the two chains there.
    pub fn update(&mut self, t: f64, x: usize, d_top: i32, d_ref: i32) {
        let jump = (d_top - d_ref) as f64 * self.weights[x] / self.delta_min;
        if jump == 0.0 {
            return;
        }
        self.area += jump;
        self.quadratic_variation_proxy += jump * jump;
        self.jumps += 1;
        self.min_jump = self.min_jump.min(jump.abs());
        self.observe(t);
    }

    /// Record `A = 0` exactly once the chains agree (removes rounding drift).
    pub fn mark_coalesced(&mut self, t: f64) {
        if self.coalesced_at.is_none() {
            self.coalesced_at = Some(t);
        }
        self.area = 0.0;
        self.observe(t);
    }

    /// Advance the stopping-time search to time `t` (call at `t_{δ/2}` too,
    /// since `A` may already be below the first thresholds there).
    pub fn observe(&mut self, t: f64) {
        if t < self.start {
            return;
        }
        while self.stopping_times.len() < self.thresholds.len()
            && self.area <= self.thresholds[self.stopping_times.len()] + 1e-9
        {
            self.stopping_times.push(t.max(self.start));
        }
    }

    /// Log the bracket lower bound against the exact rate for the current pair.
    pub fn sample(&mut self, t: f64, top: &[i32], reference: &[i32]) {
        let h = max_height(top);
        let q = longest_run(reference);
        let bound = self.lambda * self.delta_min * self.area / (3.0 * (1.0 + self.lambda) * h as f64 * q as f64);
        let rule = RingRule::pinned(self.lambda);
        let exact = bracket_rate(top, reference, &rule, &self.weights, self.delta_min);
        self.samples.push(BoundSample {
            t,
            area: self.area,
            height: h,
            q,
            lower_bound: bound.max(1.0),
            exact_rate: exact,
        });
    }
}

/// `d⟨A⟩/dt`: for every site usable by either chain, the ring rate (1)
/// times the expected squared jump of `A` over the shared coin.
pub fn bracket_rate(top: &[i32], reference: &[i32], rule: &RingRule, weights: &[f64], delta_min: f64) -> f64 {
    let l = top.len() - 1;
    let corner = |h: &[i32], x: usize| -> Option<(i32, bool)> {
        let z = h[x - 1];
        if z != h[x + 1] {
            return None;
        }
        if h[x] < z {
            Some((z, true))
        } else if z == 0 {
            None
        } else {
            Some((z, false))
        }
    };
    let threshold = |z: i32, up: bool| {
        rule.threshold(z, if up { crate::dynamics::Direction::Up } else { crate::dynamics::Direction::Down })
    };
    let mut total = 0.0;
    for x in 1..l {
        let a = corner(top, x);
        let b = corner(reference, x);
        let unit = 2.0 * weights[x] / delta_min;
        match (a, b) {
            (Some(sa), Some(sb)) if sa == sb => {
                // same clock, same direction: A moves only when one coin test passes
                let diff = (threshold(sa.0, sa.1) - threshold(sb.0, sb.1)).abs();
                total += diff * unit * unit;
            }
            _ => {
                for (z, up) in a.into_iter().chain(b) {
                    total += threshold(z, up) * unit * unit;
                }
            }
        }
    }
    total
}

/// Feeds a [`BracketDiagnostics`] from a running coupling.
pub struct BracketObserver {
    pub diag: BracketDiagnostics,
    top: usize,
    reference: usize,
    d_top: i32,
    d_ref: i32,
}

impl BracketObserver {
    pub fn new(diag: BracketDiagnostics, top: usize, reference: usize) -> Self {
        Self { diag, top, reference, d_top: 0, d_ref: 0 }
    }
}

impl Observer for BracketObserver {
    fn on_transition(&mut self, _t: f64, chain: usize, _x: usize, old: i32, new: i32) {
        if chain == self.top {
            self.d_top += new - old;
        }
        if chain == self.reference {
            self.d_ref += new - old;
        }
    }

    fn after_event(&mut self, t: f64, x: usize, engine: &CoupledEngine) -> bool {
        if self.diag.coalesced_at.is_none() {
            if engine.heights(self.top) == engine.heights(self.reference) {
                self.diag.update(t, x, self.d_top, self.d_ref);
                self.diag.mark_coalesced(t);
            } else {
                self.diag.update(t, x, self.d_top, self.d_ref);
            }
        }
        self.d_top = 0;
        self.d_ref = 0;
        true
    }
}
