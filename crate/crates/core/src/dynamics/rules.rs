//! Local moves: the corner flip, its heat-bath rate, and the clock update rules
//! of the graphical construction.

use serde::{Deserialize, Serialize};

use crate::statespace::{ModelParams, Path};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    #[inline]
    pub fn index(self) -> usize {
        match self {
            Direction::Up => 0,
            Direction::Down => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

/// One Poisson stream of the graphical construction: the square centred at
/// `(x, z)` together with the direction of the flip it proposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClockSite {
    pub x: usize,
    pub z: i32,
    pub direction: Direction,
}

impl ClockSite {
    pub fn new(x: usize, z: i32, direction: Direction) -> Self {
        Self { x, z, direction }
    }

    /// Membership of `(x, z)` in `Θ = {x ∈ [2, L−2], 1 ≤ z ≤ L/2 − 1 − |x − L/2|, x + z odd}`.
    pub fn in_theta(&self, length: usize) -> bool {
        theta_contains(length, self.x, self.z)
    }
}

pub fn theta_contains(length: usize, x: usize, z: i32) -> bool {
    if length < 4 || x < 2 || x > length - 2 {
        return false;
    }
    let half = (length / 2) as i32;
    let cap = half - 1 - (x as i32 - half).abs();
    z >= 1 && z <= cap && (x as i32 + z) % 2 == 1
}

/// Every `(x, z) ∈ Θ` in `(x, z)` order.
pub fn theta_sites(length: usize) -> Vec<(usize, i32)> {
    let mut out = Vec::new();
    if length < 4 {
        return out;
    }
    let half = (length / 2) as i32;
    for x in 2..=length - 2 {
        let cap = half - 1 - (x as i32 - half).abs();
        for z in 1..=cap {
            if (x as i32 + z) % 2 == 1 {
                out.push((x, z));
            }
        }
    }
    out
}

/// How a chain reacts to rings at level one. Pinned chains see a wall at
/// height 0 with pinning `λ`; free chains (the exclusion-process comparison
/// system) use threshold 1/2 everywhere and may go below zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingRule {
    /// Coin threshold for the up-ring at `z = 1` (flip `(1,0,1) → (1,2,1)`).
    pub up_low: f64,
    /// Coin threshold for the down-ring at `z = 1` (flip `(1,2,1) → (1,0,1)`).
    pub down_low: f64,
    pub wall: bool,
}

impl RingRule {
    pub fn pinned(lambda: f64) -> Self {
        Self { up_low: 1.0 / (1.0 + lambda), down_low: lambda / (1.0 + lambda), wall: true }
    }

    pub fn free() -> Self {
        Self { up_low: 0.5, down_low: 0.5, wall: false }
    }

    #[inline(always)]
    pub fn threshold(&self, z: i32, dir: Direction) -> f64 {
        if z == 1 {
            match dir {
                Direction::Up => self.up_low,
                Direction::Down => self.down_low,
            }
        } else {
            0.5
        }
    }
}

/// `ξ^x`: reflect the corner at `x` if that yields a path of `Ω_L`, otherwise
/// return the path unchanged.
pub fn flip(path: &Path, x: usize) -> Path {
    let h = path.heights();
    assert!(x >= 1 && x < path.length(), "column {x} out of range");
    if h[x - 1] == h[x + 1] && h[x - 1] == 0 {
        return path.clone();
    }
    let mut heights = h.to_vec();
    heights[x] = h[x - 1] + h[x + 1] - h[x];
    if heights[x] < 0 || (heights[x] - h[x]).abs() != 2 {
        return path.clone();
    }
    Path::new(heights).unwrap_or_else(|_| path.clone())
}

/// `R_x(ξ)`, the rate at which the corner at `x` flips.
pub fn rate(path: &Path, x: usize, params: &ModelParams) -> f64 {
    let h = path.heights();
    assert!(x >= 1 && x < path.length(), "column {x} out of range");
    let (l, m, r) = (h[x - 1], h[x], h[x + 1]);
    if l != r || l == 0 {
        0.0
    } else if l > 1 {
        0.5
    } else if m == 2 {
        params.wall_down_rate()
    } else {
        params.wall_up_rate()
    }
}

/// State of a single chain: `σ_t^{ξ,λ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub path: Path,
    pub time: f64,
    pub params: ModelParams,
}

/// Apply one ring of the graphical construction to a chain, following the
/// four update rules literally. Anything not covered is a no-op.
pub fn apply_clock_event(state: &ChainState, site: ClockSite, coin: f64) -> ChainState {
    let heights = apply_ring_rules(
        state.path.heights(),
        site,
        coin,
        &RingRule::pinned(state.params.lambda()),
    );
    match heights {
        Some(h) => ChainState {
            path: Path::new(h).expect("update rules keep paths in Ω_L"),
            time: state.time,
            params: state.params,
        },
        None => state.clone(),
    }
}

/// The update rules on raw heights; `None` when the ring does nothing.
pub(crate) fn apply_ring_rules(
    h: &[i32],
    site: ClockSite,
    coin: f64,
    rule: &RingRule,
) -> Option<Vec<i32>> {
    let ClockSite { x, z, direction } = site;
    if x == 0 || x + 1 >= h.len() {
        return None;
    }
    let (left, mid, right) = (h[x - 1], h[x], h[x + 1]);
    let new = match direction {
        Direction::Up => {
            if mid != z - 1 || left != z || right != z {
                return None;
            }
            // neighbours at z ≥ 2: fair coin; at z = 1: 1/(1+λ)
            let thr = if z >= 2 || !rule.wall { 0.5 } else if z == 1 { rule.up_low } else { return None };
            if coin > thr {
                return None;
            }
            z + 1
        }
        Direction::Down => {
            if mid != z + 1 || left != z || right != z {
                return None;
            }
            let thr = if z >= 2 || !rule.wall {
                0.5
            } else if z == 1 {
                // landing on the wall
                rule.down_low
            } else {
                return None;
            };
            if coin > thr {
                return None;
            }
            z - 1
        }
    };
    let mut out = h.to_vec();
    out[x] = new;
    Some(out)
}
