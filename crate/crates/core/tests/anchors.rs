use stopbound_core::bounds::{compute_bound, Problem};
use stopbound_core::geometry::{supporting_hyperplane_at, Boundary, Side};
use stopbound_core::{DistributionSpec, Region, RegionKind, ScalarFamily, Schedule, TheoremTag};

fn scalar(f: ScalarFamily) -> DistributionSpec {
    DistributionSpec::Scalar(f)
}

fn value(tag: TheoremTag, p: &Problem) -> f64 {
    let r = compute_bound(tag, p);
    assert!(r.applicable(), "{tag} not applicable: {:?}", r.assumptions);
    r.value.unwrap()
}

#[test]
fn fair_coin_reaching_five() {
    let coin = scalar(ScalarFamily::BernoulliAffine { x0: 0.0, x1: 1.0, p: 0.5 });
    let above = Region::scalar(Boundary::Constant { c: 5.0 }, Side::Above, RegionKind::Stopping).unwrap();
    let p = Problem::new(coin, above, Schedule::all_naturals()).unwrap();
    // no overshoot, so E[N] = 5 / 0.5 exactly; the upper bounds add one step of slack
    assert_eq!(value(TheoremTag::T8Lower, &p), 10.0);
    assert_eq!(value(TheoremTag::T16ChenLordenII, &p), 12.0);
    assert_eq!(value(TheoremTag::VipFormula, &p), 12.0);
}

#[test]
fn unit_steps_are_tight() {
    let unit = scalar(ScalarFamily::PointMass { value: 1.0 });
    let below = Region::scalar(Boundary::Constant { c: 5.0 }, Side::Below, RegionKind::Continuity).unwrap();
    let p = Problem::new(unit, below, Schedule::all_naturals()).unwrap();
    assert_eq!(value(TheoremTag::T8Lower, &p), 5.0);
    for tag in
        [TheoremTag::T10Upper, TheoremTag::T11UpperBounded, TheoremTag::T14Hyperplane, TheoremTag::T16ChenLordenI]
    {
        assert_eq!(value(tag, &p), 6.0, "{tag}");
    }
}

#[test]
fn line_stop_lower_bound_and_divergence() {
    let line =
        Region::scalar(Boundary::Affine { slope: 1.0, intercept: 10.0 }, Side::Above, RegionKind::Stopping).unwrap();
    let fast =
        Problem::new(scalar(ScalarFamily::PointMass { value: 2.0 }), line.clone(), Schedule::all_naturals()).unwrap();
    assert_eq!(value(TheoremTag::T8Lower, &fast), 10.0);
    let level = Problem::new(scalar(ScalarFamily::PointMass { value: 1.0 }), line, Schedule::all_naturals()).unwrap();
    assert_eq!(compute_bound(TheoremTag::T8Lower, &level).value, Some(f64::INFINITY));
}

#[test]
fn brownian_level_crossing() {
    let drift = scalar(ScalarFamily::Gaussian { mean: 0.5, sd: 1.0 });
    let below = Region::scalar(Boundary::Constant { c: 4.0 }, Side::Below, RegionKind::Continuity).unwrap();
    let p = Problem::new(drift, below, Schedule::all_naturals()).unwrap();
    assert_eq!(value(TheoremTag::Brown1, &p), 8.0);
    assert_eq!(value(TheoremTag::Brown2Lower, &p), 8.0);
}

#[test]
fn exponential_overshoot_bound() {
    let z = scalar(ScalarFamily::Exponential { rate: 1.0 });
    let below = Region::scalar(Boundary::Constant { c: 1.0 }, Side::Below, RegionKind::Continuity).unwrap();
    let p = Problem::new(z, below, Schedule::all_naturals())
        .unwrap()
        .with_threshold(ScalarFamily::PointMass { value: std::f64::consts::LN_2 });
    // E[Z²]/E[Z]·Pr{Z < ln 2} + E[(Z - ln 2)^+] = 2·(1/2) + 1/2
    assert!((value(TheoremTag::LordenT6, &p) - 1.5).abs() < 1e-12);
}

#[test]
fn square_root_boundary_tangent() {
    let sqrt = Region::scalar(Boundary::Power { c: 2.0, gamma: 0.5 }, Side::Below, RegionKind::Continuity).unwrap();
    let h = supporting_hyperplane_at(&sqrt, &[1.0], 1e-5, 500).unwrap();
    assert!((h.a[0] - 2.0).abs() < 1e-5 && (h.b + 1.0).abs() < 1e-5 && (h.c - 4.0).abs() < 1e-5, "{h:?}");
}
