//! Event-driven grand coupling.
//!
//! All chains read the same clock realization. A site `(x, z, dir)` is kept in
//! the event queue only while at least one chain has the matching corner;
//! rings of sites that no chain can use are no-ops and are never generated.
//! When a site becomes usable at time `s`, the queue receives its first ring
//! after `s`, which is exact because the realization is fixed in advance.
//! Ties are broken by `(x, z, dir)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use super::censoring::CensoringSchedule;
use super::clocks::{ClockRealization, Ring};
use super::rules::{ClockSite, Direction, RingRule};
use crate::rng::mix64;
use crate::statespace::Path;

/// Initial condition and update rule of one chain in a coupling.
#[derive(Debug, Clone)]
pub struct ChainSpec {
    pub initial: Vec<i32>,
    pub rule: RingRule,
    pub schedule: Option<Arc<CensoringSchedule>>,
}

impl ChainSpec {
    pub fn pinned(path: &Path, lambda: f64) -> Self {
        Self { initial: path.heights().to_vec(), rule: RingRule::pinned(lambda), schedule: None }
    }

    /// A chain with no wall and fair coins at every level.
    pub fn free(heights: Vec<i32>) -> Self {
        Self { initial: heights, rule: RingRule::free(), schedule: None }
    }

    pub fn with_schedule(mut self, schedule: Arc<CensoringSchedule>) -> Self {
        if !schedule.is_trivial() {
            self.schedule = Some(schedule);
        }
        self
    }
}

/// Callbacks from the event loop. All have empty defaults.
pub trait Observer {
    /// A ring found `chain` with the matching corner; `accepted` is false when
    /// the coin was too large or the site was censored.
    fn on_attempt(&mut self, _t: f64, _site: ClockSite, _chain: usize, _accepted: bool) {}
    fn on_transition(&mut self, _t: f64, _chain: usize, _x: usize, _old: i32, _new: i32) {}
    /// Called once per ring that changed at least one chain, after all updates.
    /// Returning `false` stops the run.
    fn after_event(&mut self, _t: f64, _x: usize, _engine: &CoupledEngine) -> bool {
        true
    }
}

impl Observer for () {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Horizon,
    Coalesced,
    Observer,
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    time: f64,
    x: u32,
    z: i32,
    dir: u8,
    index: u32,
    block: u64,
}

impl Pending {
    #[inline]
    fn key(&self) -> (f64, u32, i32, u8) {
        (self.time, self.x, self.z, self.dir)
    }
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    // reversed: BinaryHeap is a max-heap and we want the earliest ring
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        b.0.total_cmp(&a.0)
            .then(b.1.cmp(&a.1))
            .then(b.2.cmp(&a.2))
            .then(b.3.cmp(&a.3))
    }
}

#[derive(Debug, Clone, Copy)]
struct PairTrack {
    a: usize,
    b: usize,
    time: Option<f64>,
}

#[inline(always)]
fn zobrist(x: usize, h: i32) -> u64 {
    mix64(((x as u64) << 32) ^ (h as u32 as u64) ^ 0xA5A5_5A5A_0F0F_F0F0)
}

#[inline(always)]
fn direction(d: u8) -> Direction {
    if d == 0 {
        Direction::Up
    } else {
        Direction::Down
    }
}

/// The unique usable site at column `x`, if the column is a corner.
#[inline(always)]
fn corner(h: &[i32], x: usize, wall: bool) -> Option<(i32, u8)> {
    let z = h[x - 1];
    if z != h[x + 1] {
        return None;
    }
    if h[x] < z {
        Some((z, 0))
    } else if wall && z == 0 {
        None
    } else {
        Some((z, 1))
    }
}

pub struct CoupledEngine {
    length: usize,
    clocks: ClockRealization,
    chains: Vec<Vec<i32>>,
    rules: Vec<RingRule>,
    schedules: Vec<Option<Arc<CensoringSchedule>>>,
    alias: Vec<Option<usize>>,
    hashes: Vec<u64>,
    z_lo: i32,
    z_span: usize,
    scheduled: Vec<bool>,
    heap: BinaryHeap<Pending>,
    now: f64,
    pairs: Vec<PairTrack>,
    open_pairs: usize,
    aliasing: bool,
    changed: Vec<usize>,
    events: u64,
}

impl CoupledEngine {
    /// # Panics
    /// If the chains disagree on length.
    pub fn new(clocks: ClockRealization, specs: Vec<ChainSpec>) -> Self {
        assert!(!specs.is_empty(), "need at least one chain");
        let length = specs[0].initial.len() - 1;
        assert!(specs.iter().all(|s| s.initial.len() == length + 1), "chains of mixed length");
        let half = (length / 2) as i32;
        let lo = specs.iter().map(|s| s.initial[0].min(s.initial[length])).min().unwrap();
        let hi = specs.iter().map(|s| s.initial[0].max(s.initial[length])).max().unwrap();
        let z_lo = lo - half - 1;
        let z_span = (hi + half + 1 - z_lo + 1) as usize;
        let hashes = specs
            .iter()
            .map(|s| s.initial.iter().enumerate().fold(0u64, |acc, (x, &h)| acc ^ zobrist(x, h)))
            .collect();
        let n = specs.len();
        let mut engine = Self {
            length,
            clocks,
            rules: specs.iter().map(|s| s.rule).collect(),
            schedules: specs.iter().map(|s| s.schedule.clone()).collect(),
            chains: specs.into_iter().map(|s| s.initial).collect(),
            alias: vec![None; n],
            hashes,
            z_lo,
            z_span,
            scheduled: vec![false; (length + 1) * z_span * 2],
            heap: BinaryHeap::new(),
            now: 0.0,
            pairs: Vec::new(),
            open_pairs: 0,
            aliasing: false,
            changed: Vec::with_capacity(n),
            events: 0,
        };
        for c in 0..n {
            for x in 1..length {
                engine.ensure_column(c, x);
            }
        }
        engine
    }

    /// Merge chains that have met and will provably stay together (same
    /// rule, same censoring). Saves work once most of a coupling has coalesced.
    pub fn enable_aliasing(&mut self) {
        self.aliasing = true;
        self.refresh_pairs();
    }

    /// Record the first time chains `a` and `b` agree.
    pub fn track_pair(&mut self, a: usize, b: usize) -> usize {
        self.pairs.push(PairTrack { a, b, time: None });
        self.open_pairs += 1;
        self.refresh_pairs();
        self.pairs.len() - 1
    }

    pub fn pair_time(&self, id: usize) -> Option<f64> {
        self.pairs[id].time
    }

    pub fn all_pairs_coalesced(&self) -> bool {
        self.open_pairs == 0
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn num_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Rings processed so far that matched at least one chain.
    pub fn events(&self) -> u64 {
        self.events
    }

    #[inline]
    fn root(&self, c: usize) -> usize {
        self.alias[c].unwrap_or(c)
    }

    #[inline]
    pub fn heights(&self, c: usize) -> &[i32] {
        &self.chains[self.root(c)]
    }

    pub fn path(&self, c: usize) -> Path {
        Path::from_heights_unchecked(self.heights(c).to_vec())
    }

    #[inline(always)]
    fn slot(&self, x: usize, z: i32, dir: u8) -> usize {
        ((x * self.z_span) + (z - self.z_lo) as usize) * 2 + dir as usize
    }

    #[inline(always)]
    fn matches(h: &[i32], x: usize, z: i32, dir: u8) -> bool {
        h[x - 1] == z && h[x + 1] == z && h[x] == if dir == 0 { z - 1 } else { z + 1 }
    }

    fn relevant(&self, x: usize, z: i32, dir: u8) -> bool {
        (0..self.chains.len()).any(|c| {
            self.alias[c].is_none()
                && Self::matches(&self.chains[c], x, z, dir)
                && !(dir == 1 && z == 0 && self.rules[c].wall)
        })
    }

    #[inline]
    fn ensure_column(&mut self, c: usize, x: usize) {
        if let Some((z, dir)) = corner(&self.chains[c], x, self.rules[c].wall) {
            let slot = self.slot(x, z, dir);
            if !self.scheduled[slot] {
                self.scheduled[slot] = true;
                let site = ClockSite::new(x, z, direction(dir));
                let ring = self.clocks.next_ring_after(site, self.now);
                self.push(x, z, dir, ring);
            }
        }
    }

    #[inline]
    fn push(&mut self, x: usize, z: i32, dir: u8, ring: Ring) {
        self.heap.push(Pending { time: ring.time, x: x as u32, z, dir, index: ring.index, block: ring.block });
    }

    fn refresh_pairs(&mut self) {
        for k in 0..self.pairs.len() {
            if self.pairs[k].time.is_none() {
                self.check_pair(k);
            }
        }
    }

    fn check_pair(&mut self, k: usize) {
        let PairTrack { a, b, .. } = self.pairs[k];
        let (ra, rb) = (self.root(a), self.root(b));
        let equal = ra == rb || (self.hashes[ra] == self.hashes[rb] && self.chains[ra] == self.chains[rb]);
        if !equal {
            return;
        }
        self.pairs[k].time = Some(self.now);
        self.open_pairs -= 1;
        if self.aliasing && ra != rb {
            let same_schedule = match (&self.schedules[ra], &self.schedules[rb]) {
                (None, None) => true,
                (Some(p), Some(q)) => Arc::ptr_eq(p, q),
                _ => false,
            };
            if same_schedule && self.rules[ra] == self.rules[rb] {
                let (keep, drop) = (ra.min(rb), ra.max(rb));
                for c in 0..self.alias.len() {
                    if c == drop || self.alias[c] == Some(drop) {
                        self.alias[c] = Some(keep);
                    }
                }
                self.chains[drop].clear();
                self.chains[drop].shrink_to_fit();
            }
        }
    }

    /// Run until time `t_end` (inclusive), until every tracked pair has met
    /// (when `stop_on_coalescence`), or until the observer asks to stop.
    pub fn advance<O: Observer + ?Sized>(&mut self, t_end: f64, stop_on_coalescence: bool, obs: &mut O) -> StopReason {
        if stop_on_coalescence && !self.pairs.is_empty() && self.open_pairs == 0 {
            return StopReason::Coalesced;
        }
        let n = self.chains.len();
        while let Some(top) = self.heap.peek() {
            if top.time > t_end {
                break;
            }
            let p = self.heap.pop().unwrap();
            let (x, z, dir) = (p.x as usize, p.z, p.dir);
            let slot = self.slot(x, z, dir);
            let site = ClockSite::new(x, z, direction(dir));
            let ring = Ring { time: p.time, block: p.block, index: p.index };
            self.now = p.time;

            let mut coin = None;
            self.changed.clear();
            for c in 0..n {
                if self.alias[c].is_some() {
                    continue;
                }
                let rule = self.rules[c];
                if !Self::matches(&self.chains[c], x, z, dir) || (dir == 1 && z == 0 && rule.wall) {
                    continue;
                }
                let u = *coin.get_or_insert_with(|| self.clocks.coin(site, &ring));
                let censored = self.schedules[c].as_ref().is_some_and(|s| s.contains(p.time, x, z));
                let accepted = !censored && u <= rule.threshold(z, site.direction);
                obs.on_attempt(p.time, site, c, accepted);
                if accepted {
                    let h = &mut self.chains[c];
                    let old = h[x];
                    let new = if dir == 0 { z + 1 } else { z - 1 };
                    h[x] = new;
                    self.hashes[c] ^= zobrist(x, old) ^ zobrist(x, new);
                    self.changed.push(c);
                    obs.on_transition(p.time, c, x, old, new);
                }
            }
            if coin.is_none() {
                self.scheduled[slot] = false;
                continue;
            }
            self.events += 1;
            if self.relevant(x, z, dir) {
                let next = self.clocks.following(site, &ring);
                self.push(x, z, dir, next);
            } else {
                self.scheduled[slot] = false;
            }
            if self.changed.is_empty() {
                continue;
            }
            for k in 0..self.changed.len() {
                let c = self.changed[k];
                for y in x.saturating_sub(1).max(1)..=(x + 1).min(self.length - 1) {
                    self.ensure_column(c, y);
                }
            }
            if self.open_pairs > 0 {
                for k in 0..self.pairs.len() {
                    let pr = self.pairs[k];
                    if pr.time.is_none()
                        && (self.changed.contains(&self.root(pr.a)) || self.changed.contains(&self.root(pr.b)))
                    {
                        self.check_pair(k);
                    }
                }
            }
            if !obs.after_event(p.time, x, self) {
                return StopReason::Observer;
            }
            if stop_on_coalescence && self.open_pairs == 0 && !self.pairs.is_empty() {
                return StopReason::Coalesced;
            }
        }
        if t_end.is_finite() && t_end > self.now {
            self.now = t_end;
        }
        StopReason::Horizon
    }
}
