//! Lazily realized Poisson clocks and coins.
//!
//! Time is cut into unit blocks. Inside block `b` the rings of a site are
//! `b + E_0, b + E_0 + E_1, …` (kept while `< b + 1`), where every `E_j` and
//! every coin is hashed from `(seed, site, b, j)`. Restricting a rate-1
//! Poisson process to `[b, b+1)` by running exponential gaps from `b` is exact,
//! so this realizes independent rate-1 streams whose rings can be located
//! after any time `t` in O(1) work, with no state.

use serde::{Deserialize, Serialize};

use super::rules::{ClockSite, Direction};
use crate::rng::{hash_words, mix64, open_unit};

/// One ring of a site: when it happens and where it sits in the stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ring {
    pub time: f64,
    pub block: u64,
    pub index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClockRealization {
    pub master_seed: u64,
}

#[inline(always)]
pub(crate) fn site_key(x: usize, z: i32, dir: Direction) -> u64 {
    ((x as u64) << 34) ^ (((z as i64 as u64) & 0xFFFF_FFFF) << 1) ^ dir.index() as u64
}

impl ClockRealization {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    #[inline(always)]
    fn site_seed(&self, site: ClockSite) -> u64 {
        hash_words(self.master_seed, &[site_key(site.x, site.z, site.direction)])
    }

    #[inline(always)]
    fn word(seed: u64, block: u64, slot: u64) -> u64 {
        mix64(mix64(seed ^ block.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ slot)
    }

    #[inline(always)]
    fn gap(seed: u64, block: u64, index: u32) -> f64 {
        -open_unit(Self::word(seed, block, 2 * index as u64)).ln()
    }

    /// Coin attached to a ring, uniform on `(0, 1)` and independent of all
    /// times, so `coin ≤ threshold` never fires at threshold 0.
    #[inline]
    pub fn coin(&self, site: ClockSite, ring: &Ring) -> f64 {
        open_unit(Self::word(self.site_seed(site), ring.block, 2 * ring.index as u64 + 1))
    }

    /// First ring of `site` strictly after time `t ≥ 0`.
    pub fn next_ring_after(&self, site: ClockSite, t: f64) -> Ring {
        let seed = self.site_seed(site);
        let mut block = if t <= 0.0 { 0 } else { t.floor() as u64 };
        loop {
            let end = (block + 1) as f64;
            let mut s = block as f64;
            let mut index = 0u32;
            loop {
                s += Self::gap(seed, block, index);
                if s >= end {
                    break;
                }
                if s > t {
                    return Ring { time: s, block, index };
                }
                index += 1;
            }
            block += 1;
        }
    }

    /// The ring following `ring` in the same stream.
    pub fn following(&self, site: ClockSite, ring: &Ring) -> Ring {
        let seed = self.site_seed(site);
        let s = ring.time + Self::gap(seed, ring.block, ring.index + 1);
        if s < (ring.block + 1) as f64 {
            return Ring { time: s, block: ring.block, index: ring.index + 1 };
        }
        let mut block = ring.block + 1;
        loop {
            let first = block as f64 + Self::gap(seed, block, 0);
            if first < (block + 1) as f64 {
                return Ring { time: first, block, index: 0 };
            }
            block += 1;
        }
    }

    /// Every ring of `site` in the block `[b, b+1)`, in time order.
    pub fn rings_in_block(&self, site: ClockSite, block: u64) -> Vec<Ring> {
        let seed = self.site_seed(site);
        let end = (block + 1) as f64;
        let mut s = block as f64;
        let mut out = Vec::new();
        let mut index = 0u32;
        loop {
            s += Self::gap(seed, block, index);
            if s >= end {
                return out;
            }
            out.push(Ring { time: s, block, index });
            index += 1;
        }
    }

    /// The `k`-th ring (from 0) of a site's stream.
    pub fn kth_ring(&self, site: ClockSite, k: usize) -> Ring {
        let mut seen = 0usize;
        let mut block = 0u64;
        loop {
            let rings = self.rings_in_block(site, block);
            if seen + rings.len() > k {
                return rings[k - seen];
            }
            seen += rings.len();
            block += 1;
        }
    }
}
