//! Uncoupled single-chain sampler.
//!
//! Every usable corner rings at rate 1 and the ring is accepted with the same
//! coin thresholds as the graphical construction, so the law is that of the
//! coupled engine. There is no shared realization, which makes it the cheap
//! choice for long runs of one chain (no event queue: the ringing corner is a
//! uniform pick among the usable ones).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::rules::{Direction, RingRule};

pub struct DirectChain {
    heights: Vec<i32>,
    rule: RingRule,
    /// Columns that currently hold a usable corner.
    active: Vec<u32>,
    /// Position of each column in `active`, `u32::MAX` when absent.
    slot: Vec<u32>,
    time: f64,
    events: u64,
    rng: ChaCha8Rng,
}

impl DirectChain {
    pub fn new(initial: Vec<i32>, rule: RingRule, rng: ChaCha8Rng) -> Self {
        let n = initial.len();
        let mut chain =
            Self { heights: initial, rule, active: Vec::new(), slot: vec![u32::MAX; n], time: 0.0, events: 0, rng };
        for x in 1..n.saturating_sub(1) {
            chain.refresh(x);
        }
        chain
    }

    pub fn heights(&self) -> &[i32] {
        &self.heights
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Rings that hit a usable corner so far.
    pub fn events(&self) -> u64 {
        self.events
    }

    fn usable(&self, x: usize) -> bool {
        let h = &self.heights;
        h[x - 1] == h[x + 1] && !(self.rule.wall && h[x - 1] == 0 && h[x] == 1)
    }

    fn refresh(&mut self, x: usize) {
        let want = self.usable(x);
        let at = self.slot[x];
        if want && at == u32::MAX {
            self.slot[x] = self.active.len() as u32;
            self.active.push(x as u32);
        } else if !want && at != u32::MAX {
            let last = *self.active.last().unwrap();
            self.active.swap_remove(at as usize);
            if last as usize != x {
                self.slot[last as usize] = at;
            }
            self.slot[x] = u32::MAX;
        }
    }

    /// Run to `t_end`. Memorylessness lets the overshooting ring be discarded.
    pub fn advance(&mut self, t_end: f64) {
        let n = self.heights.len();
        while !self.active.is_empty() {
            let k = self.active.len();
            let u: f64 = self.rng.random();
            let dt = -(1.0 - u).ln() / k as f64;
            if self.time + dt > t_end {
                break;
            }
            self.time += dt;
            self.events += 1;
            let x = self.active[self.rng.random_range(0..k)] as usize;
            let z = self.heights[x - 1];
            let dir = if self.heights[x] < z { Direction::Up } else { Direction::Down };
            let coin: f64 = self.rng.random();
            // coin is uniform on [0, 1), so `<` fires with probability exactly thr
            if coin < self.rule.threshold(z, dir) {
                self.heights[x] = 2 * z - self.heights[x];
                for y in x.saturating_sub(1).max(1)..=(x + 1).min(n - 2) {
                    self.refresh(y);
                }
            }
        }
        if t_end > self.time {
            self.time = t_end;
        }
    }
}
