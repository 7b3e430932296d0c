//! Experiment configuration and its flat `key = value` text format.
//!
//! ```text
//! # comment
//! L = 64, 128
//! lambda = [1.0]
//! replicas = 300
//! master_seed = 1
//! horizon = 4x          # multiples of L² log L / π²; a bare number is absolute
//! grid = uniform 40     # or: grid = multiples 0, 0.5, 1   /   grid = times 0, 100
//! ```
//! `:` is accepted in place of `=`, brackets around lists are optional.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::statespace::mixing_scale;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}, field `{field}`: {message}")]
    Field { line: usize, field: String, message: String },
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HorizonPolicy {
    Absolute(f64),
    /// A multiple of `L² log L / π²`.
    ScaleMultiple(f64),
}

impl HorizonPolicy {
    pub fn resolve(&self, length: usize) -> f64 {
        match *self {
            Self::Absolute(t) => t,
            Self::ScaleMultiple(c) => c * mixing_scale(length),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeGrid {
    /// `n + 1` equally spaced points on `[0, horizon]`.
    Uniform(usize),
    /// Multiples of `L² log L / π²`.
    Multiples(Vec<f64>),
    Absolute(Vec<f64>),
}

impl TimeGrid {
    /// Grid points for one `L`, clipped to `[0, horizon]`.
    pub fn resolve(&self, length: usize, horizon: f64) -> Vec<f64> {
        let pts: Vec<f64> = match self {
            Self::Uniform(n) => (0..=*n).map(|k| horizon * k as f64 / *n as f64).collect(),
            Self::Multiples(m) => m.iter().map(|c| c * mixing_scale(length)).collect(),
            Self::Absolute(t) => t.clone(),
        };
        pts.into_iter().filter(|&t| t <= horizon).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub lengths: Vec<usize>,
    pub lambdas: Vec<f64>,
    pub replicas: usize,
    pub master_seed: u64,
    pub horizon: HorizonPolicy,
    pub grid: TimeGrid,
    /// Mixing thresholds for the cutoff table.
    pub epsilons: Vec<f64>,
    /// `δ` in `t_δ = (1+δ) L² log L / π²`.
    pub delta: f64,
    pub beta: Option<f64>,
    pub eta: Option<f64>,
    /// Run the censored-window and `∨`-boundary protocols.
    pub censor: bool,
    /// Run the no-wall comparison (three-chain sandwich).
    pub sep: bool,
    /// `M` in `E_{L,M}`.
    pub boundary_m: usize,
    /// `s₀ = factor · L^{16/9} log L`.
    pub s0_factor: f64,
    /// Number of quantile thresholds for the `Φ` statistic.
    pub thresholds: usize,
    pub bootstrap: usize,
    /// Exact equilibrium draws for `μ̂`; defaults to `max(replicas, 1000)`.
    pub mu_samples: Option<usize>,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            lengths: vec![32],
            lambdas: vec![1.0],
            replicas: 100,
            master_seed: 1,
            horizon: HorizonPolicy::ScaleMultiple(4.0),
            grid: TimeGrid::Uniform(40),
            epsilons: vec![0.25, 0.75],
            delta: 0.5,
            beta: None,
            eta: None,
            censor: false,
            sep: false,
            boundary_m: 16,
            s0_factor: 10.0,
            thresholds: 64,
            bootstrap: 1000,
            mu_samples: None,
            out_dir: PathBuf::from("pinmix-out"),
            threads: None,
        }
    }
}

fn sorted_strict(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.lengths.is_empty() {
            return Err(invalid("L", "at least one length is required"));
        }
        if let Some(l) = self.lengths.iter().find(|&&l| l < 2 || l % 2 == 1) {
            return Err(invalid("L", format!("L must be even and ≥ 2 (got {l})")));
        }
        if !self.lengths.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("L", "lengths must be strictly increasing"));
        }
        if self.lambdas.is_empty() {
            return Err(invalid("lambda", "at least one value is required"));
        }
        if self.lambdas.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(invalid("lambda", "λ must be finite and ≥ 0"));
        }
        if !sorted_strict(&self.lambdas) {
            return Err(invalid("lambda", "values must be strictly increasing"));
        }
        if self.replicas < 1 {
            return Err(invalid("replicas", "need at least one replica"));
        }
        match self.horizon {
            HorizonPolicy::Absolute(t) | HorizonPolicy::ScaleMultiple(t) if !(t > 0.0) || !t.is_finite() => {
                return Err(invalid("horizon", "must be finite and > 0"));
            }
            _ => {}
        }
        match &self.grid {
            TimeGrid::Uniform(0) => return Err(invalid("grid", "uniform grid needs at least one interval")),
            TimeGrid::Multiples(v) | TimeGrid::Absolute(v) => {
                if v.is_empty() || v.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
                    return Err(invalid("grid", "grid points must be finite and ≥ 0"));
                }
                if !sorted_strict(v) {
                    return Err(invalid("grid", "grid points must be strictly increasing"));
                }
            }
            _ => {}
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(invalid("epsilon", "ε must lie in (0, 1)"));
        }
        if !sorted_strict(&self.epsilons) {
            return Err(invalid("epsilon", "values must be strictly increasing"));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(invalid("delta", "δ must be finite and > 0"));
        }
        if let Some(b) = self.beta {
            crate::observables::check_beta(b).map_err(|e| invalid("beta", e.to_string()))?;
        }
        if let Some(e) = self.eta {
            if !(e > 0.0 && e < 0.5) {
                return Err(invalid("eta", "η must lie in (0, 1/2)"));
            }
        }
        if !(self.s0_factor > 0.0) || !self.s0_factor.is_finite() {
            return Err(invalid("s0_factor", "must be finite and > 0"));
        }
        if self.thresholds < 1 {
            return Err(invalid("thresholds", "need at least one threshold"));
        }
        if self.mu_samples == Some(0) {
            return Err(invalid("mu_samples", "need at least one equilibrium draw"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "need at least one thread"));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or_else(|| crate::observables::default_beta(self.delta))
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or_else(|| crate::observables::default_eta(self.delta))
    }

    pub fn mu_samples(&self) -> usize {
        self.mu_samples.unwrap_or(self.replicas.max(1000))
    }

    /// `s₀(L)`.
    pub fn s0(&self, length: usize) -> f64 {
        let l = length as f64;
        self.s0_factor * l.powf(16.0 / 9.0) * l.ln()
    }

    /// True when some λ lies outside `[0, 2)`.
    pub fn outside_repulsive_phase(&self) -> bool {
        self.lambdas.iter().any(|&l| l >= 2.0)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let Some(pos) = content.find(['=', ':']) else {
                return Err(ConfigError::Syntax { line, message: format!("expected `key = value`, got `{content}`") });
            };
            let key = content[..pos].trim();
            let value = content[pos + 1..].trim();
            let fail = |message: String| ConfigError::Field { line, field: key.to_string(), message };
            match key {
                "L" => cfg.lengths = list(value).map_err(fail)?,
                "lambda" => cfg.lambdas = list(value).map_err(fail)?,
                "replicas" => cfg.replicas = scalar(value).map_err(fail)?,
                "master_seed" | "seed" => cfg.master_seed = scalar(value).map_err(fail)?,
                "horizon" => cfg.horizon = horizon(value).map_err(fail)?,
                "grid" => cfg.grid = grid(value).map_err(fail)?,
                "epsilon" => cfg.epsilons = list(value).map_err(fail)?,
                "delta" => cfg.delta = scalar(value).map_err(fail)?,
                "beta" => cfg.beta = Some(scalar(value).map_err(fail)?),
                "eta" => cfg.eta = Some(scalar(value).map_err(fail)?),
                "censor" => cfg.censor = scalar(value).map_err(fail)?,
                "sep" => cfg.sep = scalar(value).map_err(fail)?,
                "M" => cfg.boundary_m = scalar(value).map_err(fail)?,
                "s0_factor" => cfg.s0_factor = scalar(value).map_err(fail)?,
                "thresholds" => cfg.thresholds = scalar(value).map_err(fail)?,
                "bootstrap" => cfg.bootstrap = scalar(value).map_err(fail)?,
                "mu_samples" => cfg.mu_samples = Some(scalar(value).map_err(fail)?),
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "threads" => cfg.threads = Some(scalar(value).map_err(fail)?),
                _ => return Err(fail("unknown field".into())),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Inverse of [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let lengths: Vec<String> = self.lengths.iter().map(|l| l.to_string()).collect();
        s += &format!("L = {}\n", lengths.join(", "));
        s += &format!("lambda = {}\n", join(&self.lambdas));
        s += &format!("replicas = {}\nmaster_seed = {}\n", self.replicas, self.master_seed);
        s += &match self.horizon {
            HorizonPolicy::Absolute(t) => format!("horizon = {t:?}\n"),
            HorizonPolicy::ScaleMultiple(c) => format!("horizon = {c:?}x\n"),
        };
        s += &match &self.grid {
            TimeGrid::Uniform(n) => format!("grid = uniform {n}\n"),
            TimeGrid::Multiples(v) => format!("grid = multiples {}\n", join(v)),
            TimeGrid::Absolute(v) => format!("grid = times {}\n", join(v)),
        };
        s += &format!("epsilon = {}\ndelta = {:?}\n", join(&self.epsilons), self.delta);
        if let Some(b) = self.beta {
            s += &format!("beta = {b:?}\n");
        }
        if let Some(e) = self.eta {
            s += &format!("eta = {e:?}\n");
        }
        s += &format!("censor = {}\nsep = {}\nM = {}\n", self.censor, self.sep, self.boundary_m);
        s += &format!("s0_factor = {:?}\nthresholds = {}\n", self.s0_factor, self.thresholds);
        s += &format!("bootstrap = {}\n", self.bootstrap);
        if let Some(m) = self.mu_samples {
            s += &format!("mu_samples = {m}\n");
        }
        s += &format!("out_dir = {}\n", self.out_dir.display());
        if let Some(t) = self.threads {
            s += &format!("threads = {t}\n");
        }
        s
    }
}

fn scalar<T: std::str::FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| format!("cannot parse `{value}`: {e}"))
}

fn list<T: std::str::FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    let inner = value.trim().trim_start_matches('[').trim_end_matches(']');
    if inner.trim().is_empty() {
        return Err("empty list".into());
    }
    inner.split(',').map(|v| scalar(v.trim())).collect()
}

fn horizon(value: &str) -> Result<HorizonPolicy, String> {
    match value.strip_suffix('x') {
        Some(m) => Ok(HorizonPolicy::ScaleMultiple(scalar(m.trim())?)),
        None => Ok(HorizonPolicy::Absolute(scalar(value)?)),
    }
}

fn grid(value: &str) -> Result<TimeGrid, String> {
    let (kind, rest) = value.split_once(char::is_whitespace).unwrap_or((value, ""));
    match kind {
        "uniform" => Ok(TimeGrid::Uniform(scalar(rest.trim())?)),
        "multiples" => Ok(TimeGrid::Multiples(list(rest)?)),
        "times" => Ok(TimeGrid::Absolute(list(rest)?)),
        _ => Err(format!("grid kind must be uniform, multiples or times (got `{kind}`)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config() {
        let c = ExperimentConfig::parse("L: [32]\nlambda: [1.0]\nreplicas: 10\nmaster_seed: 1\n").unwrap();
        assert_eq!(c.lengths, vec![32]);
        assert_eq!(c.replicas, 10);
        assert_eq!(c.horizon, HorizonPolicy::ScaleMultiple(4.0));
    }

    #[test]
    fn text_round_trip() {
        let c = ExperimentConfig {
            lengths: vec![8, 64],
            lambdas: vec![0.5, 1.5],
            grid: TimeGrid::Multiples(vec![0.0, 0.5, 1.25]),
            horizon: HorizonPolicy::Absolute(1234.5),
            beta: Some(2.5),
            mu_samples: Some(77),
            censor: true,
            ..Default::default()
        };
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn diagnostics_name_line_and_field() {
        let err = ExperimentConfig::parse("L = 8\n\nreplicas = ten\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Field { line: 3, field: "replicas".into(), message: "cannot parse `ten`: invalid digit found in string".into() }
        );
        assert!(matches!(ExperimentConfig::parse("L 8"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("colour = red"), Err(ConfigError::Field { .. })));
        for bad in ["L = 7", "replicas = 0", "epsilon = 1.0", "grid = times 5, 1", "L = 16, 8", "delta = 0"] {
            assert!(ExperimentConfig::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn grids_resolve() {
        assert_eq!(TimeGrid::Uniform(4).resolve(8, 10.0), vec![0.0, 2.5, 5.0, 7.5, 10.0]);
        let s = mixing_scale(64);
        assert_eq!(TimeGrid::Multiples(vec![0.0, 1.0, 9.0]).resolve(64, 4.0 * s), vec![0.0, s]);
        assert_eq!(HorizonPolicy::ScaleMultiple(2.0).resolve(64), 2.0 * s);
    }
}
