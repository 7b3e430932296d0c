use serde::Serialize;

use crate::dynamics::{
    brute_force_transitions, lazy_transitions, theta_sites, ChainSpec, ClockRealization, Transition,
    EQUILIBRIUM_STREAM,
};
use crate::rng::stream;
use crate::statespace::{sample_equilibrium, ModelParams, Path};

/// First place where the two engines disagree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Divergence {
    pub position: usize,
    pub lazy: Option<(f64, usize, usize, i32)>,
    pub brute: Option<(f64, usize, usize, i32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingCheck {
    pub transitions: usize,
    pub identical: bool,
    pub first_divergence: Option<Divergence>,
}

fn flat(t: &Transition) -> (f64, usize, usize, i32) {
    (t.time, t.chain, t.x, t.new_height)
}

/// Run `{∧, ∨, μ-start}` through the event-driven engine and through a replay
/// of every stream of `Θ`, and compare the accepted transitions bit for bit.
pub fn brute_force_coupling_check(master_seed: u64, params: &ModelParams, horizon: f64) -> CouplingCheck {
    let l = params.length();
    let lam = params.lambda();
    let mu = sample_equilibrium(params, &mut stream(master_seed, &[EQUILIBRIUM_STREAM]));
    let specs = vec![
        ChainSpec::pinned(&Path::maximal(l).expect("valid L"), lam),
        ChainSpec::pinned(&Path::minimal(l).expect("valid L"), lam),
        ChainSpec::pinned(&mu, lam),
    ];
    let clocks = ClockRealization::new(master_seed);
    let lazy = lazy_transitions(clocks, &specs, horizon);
    let brute = brute_force_transitions(clocks, &specs, &theta_sites(l), horizon);
    let first = (0..lazy.len().max(brute.len())).find(|&k| {
        match (lazy.get(k), brute.get(k)) {
            (Some(a), Some(b)) => {
                a.time.to_bits() != b.time.to_bits() || (a.chain, a.x, a.new_height) != (b.chain, b.x, b.new_height)
            }
            _ => true,
        }
    });
    CouplingCheck {
        transitions: lazy.len(),
        identical: first.is_none(),
        first_divergence: first.map(|k| Divergence {
            position: k,
            lazy: lazy.get(k).map(flat),
            brute: brute.get(k).map(flat),
        }),
    }
}
