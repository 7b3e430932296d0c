//! Corner-flip Glauber dynamics of the polymer pinning model: equilibrium,
//! coupled simulation, observables, exact small-instance analysis and
//! mixing experiments.

pub mod dynamics;
pub mod exact;
pub mod experiments;
pub mod observables;
pub mod rng;
pub mod statespace;
