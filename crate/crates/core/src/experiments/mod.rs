//! Monte Carlo experiments: coalescence and mixing-time estimates, the
//! `Φ`-statistic lower bound, cutoff tables, the censoring protocols for
//! `λ ∈ (1, 2)` and the no-wall comparison dynamics.

mod config;
mod mixing;
mod output;
mod protocols;
mod sep;
pub mod stats;

use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig, HorizonPolicy, TimeGrid};
pub use mixing::{
    cutoff_sweep, estimate_tau_distribution, mixing_sweep, replica_seed, tv_lower_curve, tv_upper_curve, CutoffRow,
    LowerPoint, MixingCurveRow, ReplicaFarm, ReplicaOutcome, SweepEntry, SweepResult, TauSummary, UpperPoint,
};
pub use output::{fmt17, write_cutoff_table, write_mixing_curve, write_tau_samples};
pub use protocols::{
    censored_wedge_protocol, exact_wedge, vee_at, vee_boundary_contact_check, wedge_at, ContactPoint, ExactWedge,
    StatisticPoint, VeeReport, WedgeReport, EXACT_WEDGE_LIMIT,
};
pub use sep::{
    bridge_min_tail_exact, sample_uniform_bridge, sep_dynamics, sep_height, three_chain_sandwich, SandwichReport,
    SepState, SepTrajectory,
};

use crate::exact::ExactError;
use crate::statespace::ParamsError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("this protocol needs λ ∈ (1, 2), got {0}")]
    LambdaRange(f64),
    #[error("L must be even and ≥ 2 (got {0})")]
    BadLength(usize),
    #[error("not a bridge: {0}")]
    BadBridge(String),
}
