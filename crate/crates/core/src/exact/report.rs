use serde::Serialize;

use super::{
    chi_square_curve, exact_tv_curve, point_mass, spectral_gap, worst_case_tv, ExactError, SparseGenerator,
    StateSpaceIndex, WorstCasePoint, DEFAULT_TOLERANCE,
};
use crate::dynamics::{CensoredSet, CensoringSchedule};
use crate::statespace::{ModelParams, Path};

/// Largest `L` for which the worst case over all starting states is computed.
const WORST_CASE_LIMIT: usize = 12;

#[derive(Debug, Clone, Serialize)]
#[allow(non_snake_case)]
pub struct ExactReport {
    pub L: usize,
    pub lambda: f64,
    pub gap: f64,
    pub kappa: f64,
    /// `d(t)` from `∧`.
    pub tv_curve: Vec<(f64, f64)>,
    pub tv_monotone: bool,
    /// From `∧` with the contact squares censored until `censor_until`.
    pub censored_tv_curve: Option<Vec<(f64, f64)>>,
    pub censor_until: Option<f64>,
    pub censoring_inequality_ok: Option<bool>,
    /// `½ e^{−t·gap} √Var_μ(dδ_∧/dμ)`.
    pub chi2_bound_curve: Vec<(f64, f64)>,
    /// `max_ξ d_ξ(t)` with the attaining state; only for small `L`.
    pub worst_case: Option<Vec<WorstCasePoint>>,
    pub outside_repulsive_phase: bool,
}

/// `4 L² log L / π²` split into 20 steps, plus `t = 0`.
pub fn default_grid(params: &ModelParams) -> Vec<f64> {
    let end = 4.0 * params.mixing_scale();
    (0..=20).map(|k| end * k as f64 / 20.0).collect()
}

pub fn exact_report(
    params: &ModelParams,
    grid: &[f64],
    censor_until: Option<f64>,
) -> Result<ExactReport, ExactError> {
    let l = params.length();
    let index = StateSpaceIndex::enumerate(l)?;
    let gen = SparseGenerator::build(&index, params);
    let mu = index.equilibrium(params);
    let gap = spectral_gap(params)?;
    let start = point_mass(&index, &Path::maximal(l).expect("valid L"))?;
    let free = exact_tv_curve(&gen, &start, &mu, grid, &CensoringSchedule::none(), DEFAULT_TOLERANCE);
    let censored = censor_until.map(|until| {
        let sched = CensoringSchedule::window(CensoredSet::Contacts, until);
        exact_tv_curve(&gen, &start, &mu, grid, &sched, DEFAULT_TOLERANCE).points
    });
    let ok = censored
        .as_ref()
        .map(|c| c.iter().zip(&free.points).all(|(a, b)| a.1 >= b.1 - 1e-10));
    let chi = chi_square_curve(&gen, &mu, &start, grid, gap)?;
    let worst = (l <= WORST_CASE_LIMIT).then(|| worst_case_tv(&index, &gen, &mu, grid, DEFAULT_TOLERANCE));
    Ok(ExactReport {
        L: l,
        lambda: params.lambda(),
        gap,
        kappa: params.kappa(),
        tv_monotone: free.monotone,
        tv_curve: free.points,
        censored_tv_curve: censored,
        censor_until,
        censoring_inequality_ok: ok,
        chi2_bound_curve: chi.iter().map(|&(t, b, _)| (t, b)).collect(),
        worst_case: worst,
        outside_repulsive_phase: !params.in_repulsive_phase(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_four_report() {
        let p = ModelParams::new(4, 1.0).unwrap();
        let r = exact_report(&p, &default_grid(&p), None).unwrap();
        assert!((r.gap - 1.0).abs() < 1e-12);
        assert!((r.kappa - 0.292_893_218_813_452_4).abs() < 1e-15);
        assert_eq!(r.tv_curve[0], (0.0, 0.5));
        assert!(r.tv_monotone);
        let json = serde_json::to_value(&r).unwrap();
        for key in ["L", "lambda", "gap", "kappa", "tv_curve", "censored_tv_curve", "chi2_bound_curve"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn censored_report() {
        let p = ModelParams::new(12, 1.5).unwrap();
        let r = exact_report(&p, &default_grid(&p), Some(p.t_delta(0.05))).unwrap();
        assert_eq!(r.censoring_inequality_ok, Some(true));
        assert!(r.worst_case.is_some());
    }
}
