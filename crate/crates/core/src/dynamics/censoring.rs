use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("censoring schedule needs one set per breakpoint")]
    Shape,
    #[error("breakpoints must start at 0 and increase strictly")]
    Breakpoints,
}

/// A subset of the clock index set that is switched off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CensoredSet {
    Empty,
    /// Every site: the dynamics is frozen.
    All,
    /// `G_L = {(x, 1) : x even, 2 ≤ x ≤ L − 2}`, the squares touching the wall.
    Contacts,
    Sites(BTreeSet<(usize, i32)>),
}

impl CensoredSet {
    #[inline]
    pub fn contains(&self, x: usize, z: i32) -> bool {
        match self {
            CensoredSet::Empty => false,
            CensoredSet::All => true,
            CensoredSet::Contacts => z == 1 && x % 2 == 0,
            CensoredSet::Sites(s) => s.contains(&(x, z)),
        }
    }
}

/// `G_L` written out.
pub fn green_squares(length: usize) -> Vec<(usize, i32)> {
    (2..=length.saturating_sub(2)).step_by(2).map(|x| (x, 1)).collect()
}

/// A right-continuous piecewise-constant map `t ↦ 𝒞(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoringSchedule {
    breakpoints: Vec<f64>,
    sets: Vec<CensoredSet>,
}

impl Default for CensoringSchedule {
    fn default() -> Self {
        Self::none()
    }
}

impl CensoringSchedule {
    pub fn new(breakpoints: Vec<f64>, sets: Vec<CensoredSet>) -> Result<Self, ScheduleError> {
        if breakpoints.len() != sets.len() || sets.is_empty() {
            return Err(ScheduleError::Shape);
        }
        if breakpoints[0] != 0.0 || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ScheduleError::Breakpoints);
        }
        Ok(Self { breakpoints, sets })
    }

    /// The uncensored dynamics.
    pub fn none() -> Self {
        Self { breakpoints: vec![0.0], sets: vec![CensoredSet::Empty] }
    }

    pub fn always(set: CensoredSet) -> Self {
        Self { breakpoints: vec![0.0], sets: vec![set] }
    }

    /// `set` on `[0, until)`, nothing afterwards.
    pub fn window(set: CensoredSet, until: f64) -> Self {
        if until <= 0.0 {
            return Self::none();
        }
        Self { breakpoints: vec![0.0, until], sets: vec![set, CensoredSet::Empty] }
    }

    pub fn is_trivial(&self) -> bool {
        self.sets.iter().all(|s| *s == CensoredSet::Empty)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn sets(&self) -> &[CensoredSet] {
        &self.sets
    }

    pub fn set_at(&self, t: f64) -> &CensoredSet {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        &self.sets[k.max(1) - 1]
    }

    #[inline]
    pub fn contains(&self, t: f64, x: usize, z: i32) -> bool {
        if self.sets.len() == 1 {
            return self.sets[0].contains(x, z);
        }
        self.set_at(t).contains(x, z)
    }
}
