use proptest::prelude::*;

use pinmix::dynamics::{coalescence_time, grand_coupling, CensoringSchedule};
use pinmix::exact::{exact_tv_curve, point_mass, SparseGenerator, StateSpaceIndex, DEFAULT_TOLERANCE};
use pinmix::experiments::stats::{survival_crossing, wilson_interval};
use pinmix::experiments::{fmt17, sample_uniform_bridge, ExperimentConfig, HorizonPolicy, SepState, TimeGrid};
use pinmix::observables::{delta_min, phi, phi_bar};
use pinmix::rng::stream;
use pinmix::statespace::{enumerate_paths, ModelParams, Path};

fn length() -> impl Strategy<Value = usize> {
    (2usize..=7).prop_map(|k| 2 * k)
}

/// A random ordered pair `(lo, hi)` with `lo ≤ hi` in `Ω_L`, built as the
/// pointwise min and max of two random paths.
fn ordered_pair() -> impl Strategy<Value = (Path, Path)> {
    length().prop_flat_map(|l| {
        let n = enumerate_paths(l).len();
        (Just(l), 0..n, 0..n)
    })
    .prop_map(|(l, i, j)| {
        let all = enumerate_paths(l);
        let (a, b) = (all[i].heights(), all[j].heights());
        let lo = Path::new(a.iter().zip(b).map(|(x, y)| *x.min(y)).collect()).unwrap();
        let hi = Path::new(a.iter().zip(b).map(|(x, y)| *x.max(y)).collect()).unwrap();
        (lo, hi)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sine_area_is_monotone((lo, hi) in ordered_pair()) {
        prop_assert!(lo.leq(&hi).unwrap());
        prop_assert!(phi(&lo) <= phi(&hi) + 1e-12);
    }

    #[test]
    fn cosine_area_gap_is_at_least_delta_min((lo, hi) in ordered_pair(), beta in 2.1f64..3.1) {
        prop_assume!(lo != hi);
        let gap = phi_bar(&hi, beta).unwrap() - phi_bar(&lo, beta).unwrap();
        prop_assert!(gap >= delta_min(lo.length(), beta) - 1e-12);
    }

    #[test]
    fn coupling_preserves_order((lo, hi) in ordered_pair(), lam in 0.0f64..3.0, seed in any::<u64>()) {
        let initials = [(lo.clone(), lam), (hi.clone(), lam), (lo, lam + 0.5), (hi, lam + 0.5)];
        let r = grand_coupling(&initials, 30.0, seed, &CensoringSchedule::none(), &[(0, 1)]).unwrap();
        prop_assert_eq!(r.order_violations, 0);
        prop_assert!(r.finals[0].leq(&r.finals[1]).unwrap());
        prop_assert!(r.finals[2].leq(&r.finals[0]).unwrap());
    }

    #[test]
    fn exact_distance_from_the_top_decreases(l in (2usize..=5).prop_map(|k| 2 * k), lam in 0.1f64..2.5) {
        let p = ModelParams::new(l, lam).unwrap();
        let index = StateSpaceIndex::enumerate(l).unwrap();
        let gen = SparseGenerator::build(&index, &p);
        let mu = index.equilibrium(&p);
        let start = point_mass(&index, &Path::maximal(l).unwrap()).unwrap();
        let grid: Vec<f64> = (0..30).map(|k| k as f64 * 0.5).collect();
        let c = exact_tv_curve(&gen, &start, &mu, &grid, &CensoringSchedule::none(), DEFAULT_TOLERANCE);
        prop_assert!(c.points.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
        prop_assert!(c.points.iter().all(|&(_, d)| (0.0..=1.0).contains(&d)));
    }

    #[test]
    fn survival_crossing_is_the_first_time_below_eps(
        samples in prop::collection::vec(prop::option::weighted(0.9, 0.0f64..100.0), 1..60),
        eps in 0.01f64..0.99,
    ) {
        let n = samples.len() as f64;
        let surv = |t: f64| samples.iter().filter(|v| v.is_none_or(|x| x > t)).count() as f64 / n;
        match survival_crossing(&samples, eps) {
            Some(t) => {
                prop_assert!(surv(t) < eps);
                // every earlier sample value leaves the survival at or above ε
                for x in samples.iter().flatten().filter(|&&x| x < t) {
                    prop_assert!(surv(*x) >= eps);
                }
                prop_assert!(surv(t - 1e-9 * t.abs().max(1.0)) >= eps);
            }
            None => {
                let last = samples.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
                prop_assert!(surv(last) >= eps);
            }
        }
    }

    #[test]
    fn wilson_interval_contains_the_estimate(n in 1usize..5000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).floor() as usize;
        let (lo, hi) = wilson_interval(k, n, 1.96);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
        let (lo4, hi4) = wilson_interval(4 * k, 4 * n, 1.96);
        prop_assert!(hi4 - lo4 <= hi - lo + 1e-12);
    }

    #[test]
    fn csv_floats_reparse_exactly(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(fmt17(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn uniform_bridges_are_bridges(l in (1usize..=20).prop_map(|k| 2 * k), m in 0i32..40, seed in any::<u64>()) {
        let b = sample_uniform_bridge(l, m, &mut stream(seed, &[]));
        prop_assert!(SepState::new(b.heights().to_vec(), m).is_ok());
    }

    #[test]
    fn config_text_round_trips(
        lengths in prop::collection::btree_set(1usize..64, 1..4),
        lambdas in prop::collection::btree_set(0u32..400, 1..4),
        replicas in 1usize..10_000,
        seed in any::<u64>(),
        horizon in prop_oneof![(0.5f64..10.0).prop_map(HorizonPolicy::ScaleMultiple), (1.0f64..1e6).prop_map(HorizonPolicy::Absolute)],
        uniform in 1usize..200,
        delta in 0.01f64..0.99,
        censor in any::<bool>(),
        sep in any::<bool>(),
        threads in prop::option::of(1usize..64),
    ) {
        let cfg = ExperimentConfig {
            lengths: lengths.into_iter().map(|k| 2 * k).collect(),
            lambdas: lambdas.into_iter().map(|k| k as f64 / 100.0).collect(),
            replicas,
            master_seed: seed,
            horizon,
            grid: TimeGrid::Uniform(uniform),
            delta,
            censor,
            sep,
            threads,
            ..ExperimentConfig::default()
        };
        prop_assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
}

/// Two-sample KS statistic.
fn ks(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for &t in a.iter().chain(&b) {
        let fa = a.partition_point(|&x| x <= t) as f64 / a.len() as f64;
        let fb = b.partition_point(|&x| x <= t) as f64 / b.len() as f64;
        d = d.max((fa - fb).abs());
    }
    d
}

// At λ = 0 the walled chain never touches the wall, and shifting it down by
// one gives the chain on Ω_{L−2} at λ = 1, so the top-chain meeting times agree in law.
#[test]
fn zero_pinning_matches_the_shorter_unpinned_system() {
    let n = 400;
    let horizon = 1e4;
    let tau1 = |l: usize, lam: f64, offset: u64| -> Vec<f64> {
        let p = ModelParams::new(l, lam).unwrap();
        (0..n).map(|s| coalescence_time(s + offset, &p, horizon).tau1.expect("met before the horizon")).collect()
    };
    let a = tau1(12, 0.0, 0);
    let b = tau1(10, 1.0, 1_000_000);
    let d = ks(a, b);
    // KS critical value at level 0.001
    let crit = 1.95 * (2.0 / n as f64).sqrt();
    assert!(d < crit, "KS distance {d} ≥ {crit}");
}
