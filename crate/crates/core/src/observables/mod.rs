//! Functionals of paths: contacts, weighted areas, the wall terms, height and
//! monotone-run statistics, and the generator acting on coordinates and on `Φ`.

mod bracket;

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bracket::{bracket_rate, BracketDiagnostics, BracketObserver, BoundSample};

use crate::dynamics::{flip, rate};
use crate::statespace::{ModelParams, Path};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ObservableError {
    #[error("beta must lie in (2π/3, π) (got {0})")]
    BadBeta(f64),
    #[error("weights built for L = {0} applied to a path of length {1}")]
    LengthMismatch(usize, usize),
    #[error("top path lies below the reference path at column {0}")]
    OrderViolation(usize),
    #[error("generator identity failed: direct {direct} vs closed form {closed}")]
    IdentityMismatch { direct: f64, closed: f64 },
    #[error("column {0} outside [1, L-1]")]
    BadColumn(usize),
}

/// Tolerance used by the dual evaluations of the generator.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightKind {
    Sine,
    CosineBeta(f64),
}

/// `w[x]` for `x ∈ [0, L]`; the endpoints carry zero height so their weight
/// never matters.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaWeights {
    kind: WeightKind,
    weights: Vec<f64>,
}

impl AreaWeights {
    /// `sin(πx/L)`.
    pub fn sine(length: usize) -> Self {
        let l = length as f64;
        let weights = (0..=length).map(|x| (PI * x as f64 / l).sin()).collect();
        Self { kind: WeightKind::Sine, weights }
    }

    /// `cos(β(x − L/2)/L)` with `β ∈ (2π/3, π)`.
    pub fn cosine(length: usize, beta: f64) -> Result<Self, ObservableError> {
        check_beta(beta)?;
        let l = length as f64;
        let weights = (0..=length).map(|x| (beta * (x as f64 - l / 2.0) / l).cos()).collect();
        Ok(Self { kind: WeightKind::CosineBeta(beta), weights })
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn length(&self) -> usize {
        self.weights.len() - 1
    }

    #[inline]
    pub fn weight(&self, x: usize) -> f64 {
        self.weights[x]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_{x=1}^{L−1} w[x] h[x]`.
    pub fn area(&self, heights: &[i32]) -> f64 {
        heights[1..heights.len() - 1]
            .iter()
            .zip(&self.weights[1..])
            .map(|(&h, &w)| h as f64 * w)
            .sum()
    }

    pub fn apply(&self, path: &Path) -> Result<f64, ObservableError> {
        if path.length() != self.length() {
            return Err(ObservableError::LengthMismatch(self.length(), path.length()));
        }
        Ok(self.area(path.heights()))
    }
}

pub fn check_beta(beta: f64) -> Result<(), ObservableError> {
    if beta > 2.0 * PI / 3.0 && beta < PI {
        Ok(())
    } else {
        Err(ObservableError::BadBeta(beta))
    }
}

/// `β(δ) = π √((1 + 9δ/20)/(1 + δ/2))`.
pub fn default_beta(delta: f64) -> f64 {
    PI * ((1.0 + 9.0 * delta / 20.0) / (1.0 + delta / 2.0)).sqrt()
}

/// `η(δ) = min(δ/10, 0.05)`.
pub fn default_eta(delta: f64) -> f64 {
    (delta / 10.0).min(0.05)
}

/// `K = ⌈1/(2η)⌉`.
pub fn stopping_levels(eta: f64) -> usize {
    (1.0 / (2.0 * eta)).ceil() as usize
}

/// `δ_min = 2 cos(β(L/2 − 1)/L)`, the normalization of `A`.
pub fn delta_min(length: usize, beta: f64) -> f64 {
    let l = length as f64;
    2.0 * (beta * (l / 2.0 - 1.0) / l).cos()
}

/// `Φ(ξ) = Σ ξ_x sin(πx/L)`.
pub fn phi(path: &Path) -> f64 {
    AreaWeights::sine(path.length()).area(path.heights())
}

/// `Φ̄_β(ξ) = Σ ξ_x cos(β(x − L/2)/L)`.
pub fn phi_bar(path: &Path, beta: f64) -> Result<f64, ObservableError> {
    Ok(AreaWeights::cosine(path.length(), beta)?.area(path.heights()))
}

#[inline]
fn wall_ratio(lambda: f64) -> f64 {
    (lambda - 1.0) / (lambda + 1.0)
}

fn wall_sum(path: &Path, params: &ModelParams, absolute: bool) -> f64 {
    let h = path.heights();
    let l = path.length();
    let c = if absolute { wall_ratio(params.lambda()).abs() } else { -wall_ratio(params.lambda()) };
    let mut s = 0.0;
    for x in 1..l {
        let w = (PI * x as f64 / l as f64).sin();
        if h[x - 1] == 0 && h[x + 1] == 0 {
            s += w;
        } else if h[x - 1] == 1 && h[x + 1] == 1 {
            s += c * w;
        }
    }
    s
}

/// `Ψ(ξ) = Σ sin(πx/L)[1{ξ_{x−1}=ξ_{x+1}=0} − ((λ−1)/(λ+1))1{ξ_{x−1}=ξ_{x+1}=1}]`.
pub fn psi(path: &Path, params: &ModelParams) -> f64 {
    wall_sum(path, params, false)
}

/// `Ψ̄`: as `Ψ` with the absolute value of the second coefficient.
pub fn psi_bar(path: &Path, params: &ModelParams) -> f64 {
    wall_sum(path, params, true)
}

/// `(Δξ)_x + 1{ξ_{x−1}=ξ_{x+1}=0} − ((λ−1)/(λ+1))1{ξ_{x−1}=ξ_{x+1}=1}`.
pub fn generator_coordinate_closed_form(path: &Path, x: usize, lambda: f64) -> f64 {
    let h = path.heights();
    let (l, m, r) = (h[x - 1] as f64, h[x] as f64, h[x + 1] as f64);
    let mut v = 0.5 * (l + r) - m;
    if h[x - 1] == 0 && h[x + 1] == 0 {
        v += 1.0;
    } else if h[x - 1] == 1 && h[x + 1] == 1 {
        v -= wall_ratio(lambda);
    }
    v
}

/// `𝓛ξ_x`, evaluated from the rates and checked against the closed form.
pub fn generator_apply_coordinate(path: &Path, x: usize, params: &ModelParams) -> Result<f64, ObservableError> {
    if x == 0 || x >= path.length() {
        return Err(ObservableError::BadColumn(x));
    }
    // only the flip at x moves column x
    let direct = rate(path, x, params) * (flip(path, x).height(x) - path.height(x)) as f64;
    let closed = generator_coordinate_closed_form(path, x, params.lambda());
    if (direct - closed).abs() > IDENTITY_TOLERANCE {
        return Err(ObservableError::IdentityMismatch { direct, closed });
    }
    Ok(direct)
}

/// `(𝓛Φ)(ξ)`, evaluated from the rates and checked against `−κ_L Φ + Ψ`.
pub fn generator_apply_phi(path: &Path, params: &ModelParams) -> Result<f64, ObservableError> {
    let l = path.length();
    let weights = AreaWeights::sine(l);
    let base = weights.area(path.heights());
    let mut direct = 0.0;
    for x in 1..l {
        let r = rate(path, x, params);
        if r > 0.0 {
            direct += r * (weights.area(flip(path, x).heights()) - base);
        }
    }
    let closed = -params.kappa() * base + psi(path, params);
    let scale = 1.0f64.max(direct.abs()).max(closed.abs());
    if (direct - closed).abs() > IDENTITY_TOLERANCE * scale {
        return Err(ObservableError::IdentityMismatch { direct, closed });
    }
    Ok(direct)
}

/// `max_x ξ_x`.
pub fn height_max(path: &Path) -> i32 {
    max_height(path.heights())
}

pub(crate) fn max_height(h: &[i32]) -> i32 {
    h.iter().copied().max().unwrap_or(0)
}

/// Longest run of equal consecutive steps.
pub fn q_monotone(path: &Path) -> usize {
    longest_run(path.heights())
}

pub(crate) fn longest_run(h: &[i32]) -> usize {
    let mut best = 0;
    let mut run = 0;
    let mut prev = 0;
    for w in h.windows(2) {
        let s = w[1] - w[0];
        run = if s == prev { run + 1 } else { 1 };
        prev = s;
        best = best.max(run);
    }
    best
}

/// `A = (Φ̄(top) − Φ̄(ref))/δ_min` for a coupled pair with `top ≥ ref`.
pub fn area_process(top: &Path, reference: &Path, beta: f64) -> Result<f64, ObservableError> {
    if top.length() != reference.length() {
        return Err(ObservableError::LengthMismatch(top.length(), reference.length()));
    }
    if let Some(x) = (0..=top.length()).find(|&x| top.height(x) < reference.height(x)) {
        return Err(ObservableError::OrderViolation(x));
    }
    let w = AreaWeights::cosine(top.length(), beta)?;
    Ok((w.area(top.heights()) - w.area(reference.heights())) / delta_min(top.length(), beta))
}

/// One row of the observable snapshot log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservableSnapshot {
    pub t: f64,
    pub contacts: usize,
    pub phi: f64,
    pub phi_bar: f64,
    pub psi: f64,
    /// `A` against a reference chain, when one is present.
    pub area: Option<f64>,
    pub height: i32,
    pub q: usize,
}

impl ObservableSnapshot {
    pub fn of(
        t: f64,
        path: &Path,
        params: &ModelParams,
        cosine: &AreaWeights,
        reference: Option<&Path>,
    ) -> Self {
        let dmin = match cosine.kind() {
            WeightKind::CosineBeta(b) => delta_min(path.length(), b),
            WeightKind::Sine => 1.0,
        };
        let phi_bar = cosine.area(path.heights());
        Self {
            t,
            contacts: path.contacts(),
            phi: phi(path),
            phi_bar,
            psi: psi(path, params),
            area: reference.map(|r| (phi_bar - cosine.area(r.heights())) / dmin),
            height: height_max(path),
            q: q_monotone(path),
        }
    }
}

/// CSV with columns `t,N,Phi,PhiBar,Psi,A,H,Q`; `A` is empty when absent.
pub fn write_snapshots<W: Write>(mut out: W, rows: &[ObservableSnapshot]) -> std::io::Result<()> {
    writeln!(out, "t,N,Phi,PhiBar,Psi,A,H,Q")?;
    for r in rows {
        let a = r.area.map(|a| format!("{a:.17e}")).unwrap_or_default();
        writeln!(
            out,
            "{:.17e},{},{:.17e},{:.17e},{:.17e},{a},{},{}",
            r.t, r.contacts, r.phi, r.phi_bar, r.psi, r.height, r.q
        )?;
    }
    Ok(())
}
