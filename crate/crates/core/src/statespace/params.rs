use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::path::check_length;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("L must be even and ≥ 2 (got {0})")]
    BadLength(usize),
    #[error("lambda must be finite and ≥ 0 (got {0})")]
    BadLambda(f64),
}

/// System size and pinning strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    length: usize,
    lambda: f64,
}

impl ModelParams {
    pub fn new(length: usize, lambda: f64) -> Result<Self, ParamsError> {
        check_length(length).map_err(|_| ParamsError::BadLength(length))?;
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(ParamsError::BadLambda(lambda));
        }
        Ok(Self { length, lambda })
    }

    #[inline]
    pub fn length(&self) -> usize {
        self.length
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `κ_L = 1 − cos(π/L)`, the Laplacian constant bounding the spectral gap from below.
    pub fn kappa(&self) -> f64 {
        kappa(self.length)
    }

    /// Rate of the `(1,2,1) → (1,0,1)` flip.
    #[inline]
    pub fn wall_down_rate(&self) -> f64 {
        self.lambda / (1.0 + self.lambda)
    }

    /// Rate of the `(1,0,1) → (1,2,1)` flip.
    #[inline]
    pub fn wall_up_rate(&self) -> f64 {
        1.0 / (1.0 + self.lambda)
    }

    /// `L² log L / π²`, the cutoff location.
    pub fn mixing_scale(&self) -> f64 {
        mixing_scale(self.length)
    }

    /// `t_δ = (1 + δ) L² log L / π²`.
    pub fn t_delta(&self, delta: f64) -> f64 {
        (1.0 + delta) * self.mixing_scale()
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self, ParamsError> {
        Self::new(self.length, lambda)
    }

    pub fn in_repulsive_phase(&self) -> bool {
        self.lambda < 2.0
    }
}

pub fn kappa(length: usize) -> f64 {
    1.0 - (PI / length as f64).cos()
}

pub fn mixing_scale(length: usize) -> f64 {
    let l = length as f64;
    l * l * l.ln() / (PI * PI)
}

/// A weight on natural-log scale. Weight zero is `-∞`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogWeight(pub f64);

impl LogWeight {
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);
    pub const ONE: LogWeight = LogWeight(0.0);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn exp(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// `λ^n` with the convention `0⁰ = 1`.
    pub fn power(lambda: f64, n: usize) -> LogWeight {
        if n == 0 {
            LogWeight::ONE
        } else if lambda == 0.0 {
            LogWeight::ZERO
        } else {
            LogWeight(n as f64 * lambda.ln())
        }
    }
}
