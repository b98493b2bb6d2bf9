use proptest::prelude::*;

use stopbound_core::bounds::{chernoff_tail, compute_bound, hoeffding_tail, Problem};
use stopbound_core::geometry::{Boundary, Side};
use stopbound_core::simulate::{run_overshoot, simulate_runs, SimOptions};
use stopbound_core::{DistributionSpec, Region, RegionKind, ScalarFamily, Schedule, TheoremTag};

fn schedule_strategy() -> impl Strategy<Value = Schedule> {
    prop_oneof![
        Just(Schedule::all_naturals()),
        (0u64..5, 1u64..5).prop_map(|(n0, step)| Schedule::arithmetic(n0, step).unwrap()),
        (1u64..5, 1.1f64..3.0).prop_map(|(n0, r)| Schedule::geometric(n0, r).unwrap()),
    ]
}

fn increment_strategy() -> impl Strategy<Value = ScalarFamily> {
    prop_oneof![
        (0.1f64..2.0).prop_map(|value| ScalarFamily::PointMass { value }),
        (0.2f64..0.9).prop_map(|p| ScalarFamily::BernoulliAffine { x0: 0.0, x1: 1.0, p }),
        (0.0f64..1.0, 0.5f64..2.0).prop_map(|(lo, w)| ScalarFamily::Uniform { lo, hi: lo + w }),
        (0.5f64..3.0).prop_map(|rate| ScalarFamily::Exponential { rate }),
    ]
}

fn level(c: f64) -> Region {
    Region::scalar(Boundary::Constant { c }, Side::Below, RegionKind::Continuity).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn schedules_increase(s in schedule_strategy()) {
        let points: Vec<u64> = s.iter_from_zero().take(200).collect();
        prop_assert!(points.windows(2).all(|w| w[0] < w[1]), "{points:?}");
        prop_assert_eq!(points[0], s.n0());
        for (l, p) in points.iter().enumerate().take(50) {
            prop_assert_eq!(s.element(l as u64), Some(*p));
        }
    }

    #[test]
    fn runs_stop_at_schedule_points(
        z in increment_strategy(),
        s in schedule_strategy(),
        c in 1.0f64..20.0,
        seed in any::<u64>(),
    ) {
        let spec = DistributionSpec::Scalar(z);
        let opts = SimOptions { n_runs: 64, seed, ..SimOptions::default() };
        let records = simulate_runs(&level(c), &spec, &s, &opts).unwrap();
        let points: Vec<u64> = s.iter_from_zero().take_while(|p| *p <= opts.horizon).collect();
        for r in records.iter().filter(|r| !r.truncated) {
            prop_assert!(r.m < r.n);
            prop_assert!(r.s_n[0] > c, "stopped inside the region at {}", r.n);
            let i = points.binary_search(&r.n).map_err(|_| TestCaseError::fail(format!("{} off schedule", r.n)))?;
            prop_assert!(i > 0 && points[i - 1] == r.m);
        }
    }

    #[test]
    fn worker_count_does_not_change_runs(z in increment_strategy(), seed in any::<u64>()) {
        let spec = DistributionSpec::Scalar(z);
        let run = |workers| {
            let opts = SimOptions { n_runs: 300, seed, workers, ..SimOptions::default() };
            simulate_runs(&level(6.0), &spec, &Schedule::all_naturals(), &opts).unwrap()
        };
        prop_assert_eq!(run(1), run(3));
    }

    #[test]
    fn overshoot_is_nonnegative(z in increment_strategy(), lam in 0.0f64..10.0, s in schedule_strategy(), seed in any::<u64>()) {
        let opts = SimOptions { n_runs: 200, seed, ..SimOptions::default() };
        let (summary, records) = run_overshoot(&z, &ScalarFamily::PointMass { value: lam }, &s, &opts).unwrap();
        prop_assert!(records.iter().filter(|r| !r.truncated).all(|r| r.overshoot >= 0.0));
        prop_assert!(summary.mean >= 0.0);
    }

    #[test]
    fn chernoff_never_exceeds_hoeffding(
        lo in -2.0f64..2.0,
        w in 0.1f64..3.0,
        p in 0.05f64..0.95,
        n in 1.0f64..200.0,
        frac in 0.01f64..0.9,
    ) {
        let families = [
            ScalarFamily::Uniform { lo, hi: lo + w },
            ScalarFamily::BernoulliAffine { x0: lo, x1: lo + w, p },
        ];
        for fam in families {
            let room = (lo + w - fam.mean()).min(fam.mean() - lo);
            let dev = frac * room;
            for upper in [true, false] {
                let c = chernoff_tail(&fam, n, dev, upper);
                let h = hoeffding_tail(n, dev, w, false);
                prop_assert!(c <= h * (1.0 + 1e-9) + 1e-300, "{fam:?} n={n} dev={dev}: {c} > {h}");
            }
        }
    }

    #[test]
    fn complement_covers_and_interiors_are_disjoint(
        c in 0.5f64..10.0,
        slope in -1.0f64..1.0,
        t in 0.1f64..50.0,
        s in -50.0f64..50.0,
    ) {
        let regions = [
            level(c),
            Region::scalar(Boundary::Affine { slope, intercept: c }, Side::Above, RegionKind::Stopping).unwrap(),
            Region::scalar(Boundary::Power { c, gamma: 0.5 }, Side::Below, RegionKind::Continuity).unwrap(),
            Region::halfspace(vec![1.0], slope, c, RegionKind::Continuity).unwrap(),
        ];
        for r in &regions {
            let comp = r.complement();
            prop_assert_ne!(comp.kind(), r.kind());
            prop_assert!(r.contains(t, &[s]) || comp.contains(t, &[s]));
            prop_assert!(!(r.contains_strict(t, &[s]) && comp.contains_strict(t, &[s])));
        }
    }

    #[test]
    fn closed_forms_match_bisection(c in 0.5f64..10.0, gamma in 0.1f64..0.9, mu in 0.05f64..3.0, n in 1.0f64..100.0) {
        let regions = [
            level(c),
            Region::scalar(Boundary::Power { c, gamma }, Side::Below, RegionKind::Continuity).unwrap(),
            Region::scalar(Boundary::Affine { slope: 0.5 * mu, intercept: c }, Side::Below, RegionKind::Continuity).unwrap(),
        ];
        for r in &regions {
            let exact = r.rho(n, &[mu]).unwrap();
            let searched = r.clone().without_hooks().rho(n, &[mu]).unwrap();
            prop_assert!((exact - searched).abs() <= 1e-7 * (1.0 + exact), "{}: {exact} vs {searched}", r.label());
            let m = r.find_m(&[mu], 1e-12).unwrap();
            let m2 = r.clone().without_hooks().find_m(&[mu], 1e-12).unwrap();
            prop_assert!((m - m2).abs() <= 1e-7 * (1.0 + m), "{}: m {m} vs {m2}", r.label());
        }
    }

    #[test]
    fn lower_bounds_stay_below_upper_bounds(z in increment_strategy(), c in 1.0f64..30.0) {
        let p = Problem::new(DistributionSpec::Scalar(z), level(c), Schedule::all_naturals()).unwrap();
        let lower = compute_bound(TheoremTag::T8Lower, &p);
        prop_assume!(lower.applicable());
        let lo = lower.value.unwrap();
        for tag in [TheoremTag::T10Upper, TheoremTag::T14Hyperplane, TheoremTag::T16ChenLordenII, TheoremTag::VipFormula] {
            let up = compute_bound(tag, &p);
            if up.applicable() {
                let v = up.value.unwrap();
                prop_assert!(lo <= v * (1.0 + 1e-9), "{tag}: lower {lo} above upper {v}");
            }
        }
    }
}
