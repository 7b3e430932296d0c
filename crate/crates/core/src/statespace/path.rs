use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathError {
    #[error("L must be even and ≥ 2 (got {0})")]
    BadLength(usize),
    #[error("path must start and end at height 0")]
    Endpoint,
    #[error("step at x={0} is not ±1")]
    Step(usize),
    #[error("negative height at x={0}")]
    Negative(usize),
    #[error("paths have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("path touches the wall at x={0}; only contact-free paths can be projected")]
    HasContact(usize),
    #[error("cannot parse path: {0}")]
    Parse(String),
}

/// A nonnegative nearest-neighbour bridge `(ξ_0, …, ξ_L)` with `ξ_0 = ξ_L = 0`.
///
/// Heights are stored directly since every rate and observable reads them.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Path {
    heights: Vec<i32>,
}

impl Path {
    pub fn new(heights: Vec<i32>) -> Result<Self, PathError> {
        let len = heights.len().saturating_sub(1);
        if heights.len() < 3 || len % 2 != 0 {
            return Err(PathError::BadLength(len));
        }
        if heights[0] != 0 || heights[len] != 0 {
            return Err(PathError::Endpoint);
        }
        for x in 0..len {
            if (heights[x + 1] - heights[x]).abs() != 1 {
                return Err(PathError::Step(x));
            }
        }
        if let Some(x) = heights.iter().position(|&h| h < 0) {
            return Err(PathError::Negative(x));
        }
        Ok(Self { heights })
    }

    /// Build from a ±1 step sequence.
    pub fn from_steps(steps: &[i8]) -> Result<Self, PathError> {
        let mut heights = Vec::with_capacity(steps.len() + 1);
        heights.push(0);
        let mut h = 0i32;
        for &s in steps {
            h += s as i32;
            heights.push(h);
        }
        Self::new(heights)
    }

    pub(crate) fn from_heights_unchecked(heights: Vec<i32>) -> Self {
        debug_assert!(Self::new(heights.clone()).is_ok());
        Self { heights }
    }

    /// The maximal path `∧_x = min(x, L − x)`.
    pub fn maximal(length: usize) -> Result<Self, PathError> {
        check_length(length)?;
        let heights = (0..=length).map(|x| x.min(length - x) as i32).collect();
        Ok(Self { heights })
    }

    /// The minimal path `∨_x = x mod 2`.
    pub fn minimal(length: usize) -> Result<Self, PathError> {
        check_length(length)?;
        let heights = (0..=length).map(|x| (x % 2) as i32).collect();
        Ok(Self { heights })
    }

    #[inline]
    pub fn length(&self) -> usize {
        self.heights.len() - 1
    }

    #[inline]
    pub fn heights(&self) -> &[i32] {
        &self.heights
    }

    pub fn into_heights(self) -> Vec<i32> {
        self.heights
    }

    #[inline]
    pub fn height(&self, x: usize) -> i32 {
        self.heights[x]
    }

    /// Number of interior zeros, `N(ξ) = #{x ∈ [1, L−1] : ξ_x = 0}`.
    pub fn contacts(&self) -> usize {
        let l = self.length();
        self.heights[1..l].iter().filter(|&&h| h == 0).count()
    }

    /// Coordinatewise order `ξ ≤ ξ'`.
    pub fn leq(&self, other: &Path) -> Result<bool, PathError> {
        if self.length() != other.length() {
            return Err(PathError::LengthMismatch(self.length(), other.length()));
        }
        Ok(self.heights.iter().zip(&other.heights).all(|(a, b)| a <= b))
    }

    /// Steps `ξ_{x+1} − ξ_x`.
    pub fn steps(&self) -> impl Iterator<Item = i8> + '_ {
        self.heights.windows(2).map(|w| (w[1] - w[0]) as i8)
    }

    /// Canonical encoding: bit `k` is set iff step `k` is a down step.
    /// Only defined for `L ≤ 64`.
    pub fn encode(&self) -> u64 {
        assert!(self.length() <= 64, "encoding limited to L ≤ 64");
        self.steps()
            .enumerate()
            .fold(0u64, |acc, (k, s)| if s < 0 { acc | (1 << k) } else { acc })
    }

    pub fn decode(length: usize, code: u64) -> Result<Self, PathError> {
        check_length(length)?;
        let steps: Vec<i8> = (0..length)
            .map(|k| if code >> k & 1 == 1 { -1 } else { 1 })
            .collect();
        Self::from_steps(&steps)
    }

    /// Lift a path of `Ω_{L−2}` to the contact-free path of `Ω_L` sitting one unit higher.
    pub fn lift(&self) -> Path {
        let mut heights = Vec::with_capacity(self.heights.len() + 2);
        heights.push(0);
        heights.extend(self.heights.iter().map(|h| h + 1));
        heights.push(0);
        Path { heights }
    }

    /// Inverse of [`Path::lift`]: `ς_x = ξ_{x+1} − 1`.
    pub fn project(&self) -> Result<Path, PathError> {
        let l = self.length();
        if l < 4 {
            return Err(PathError::BadLength(l.saturating_sub(2)));
        }
        if let Some(x) = (1..l).find(|&x| self.heights[x] == 0) {
            return Err(PathError::HasContact(x));
        }
        let heights = self.heights[1..l].iter().map(|h| h - 1).collect();
        Ok(Path { heights })
    }
}

pub(crate) fn check_length(length: usize) -> Result<(), PathError> {
    if length < 2 || length % 2 != 0 {
        Err(PathError::BadLength(length))
    } else {
        Ok(())
    }
}

impl fmt::Debug for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Path({self})")
    }
}

/// Text format: heights separated by single spaces, e.g. `0 1 2 1 0`.
impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, h) in self.heights.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{h}")?;
        }
        Ok(())
    }
}

impl FromStr for Path {
    type Err = PathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let heights = s
            .split_whitespace()
            .map(|t| t.parse::<i32>().map_err(|e| PathError::Parse(format!("{t:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Path::new(heights)
    }
}
