use super::{reciprocal_g, sample_mean_g, standard_assumptions, AssumptionStatus, BoundReport, Problem, TheoremTag};
use crate::geometry::{audit_convexity, TIGHT_TOL};
use crate::gfun::GFun;
use crate::optimize::{max_concave_over_box, max_t_over_slab, Slab, SlabLines};

/// `min 𝒜`, the first time the mean ray enters the stopping region; `+∞` if it never does.
pub fn lower_bound_stopping(p: &Problem) -> BoundReport {
    let mut r = BoundReport::new(TheoremTag::T8Lower);
    let stop = p.stopping();
    let convex = stop.is_convex() && audit_convexity(&stop, p.mu(), 100.0, p.options.convexity_trials, 13).is_none();
    r.check("stopping-convex", convex, "closed stopping region is convex");
    match stop.ray_interval(p.mu(), TIGHT_TOL) {
        Ok(None) => {
            r.note("mean ray never enters the stopping region; E[N] is infinite");
            r.value = Some(f64::INFINITY);
        }
        Ok(Some(iv)) => {
            r.diag("entry", iv.lo);
            r.diag("exit", iv.hi);
            r.value = Some(iv.lo);
        }
        Err(e) => return r.fail("ray", &e),
    }
    r
}

/// `λ·E[M] + K` with `E[M]` bounded by the largest time reachable inside the slab.
pub fn upper_bound_via_m(p: &Problem, bounded: bool) -> BoundReport {
    let tag = if bounded { TheoremTag::T11UpperBounded } else { TheoremTag::T10Upper };
    let mut r = BoundReport::new(tag);
    standard_assumptions(&mut r, p);
    let prof = &p.profile;
    let (lam, k, n0) = (p.schedule.lambda, p.schedule.k, p.schedule.n0() as f64);
    let mu = prof.mean.clone();

    let (pos, neg, primed) = if bounded {
        let (Some((a, b)), Some(v)) = (prof.support(), prof.bound_v.as_ref()) else {
            r.check("support", false, "requires bounded support");
            return r;
        };
        r.check("support", true, "support bounds available");
        let primed = SlabLines {
            alpha: b.iter().zip(&mu).map(|(b, m)| b + lam * (m - b)).collect(),
            beta: a.iter().zip(&mu).map(|(a, m)| a + lam * (m - a)).collect(),
            zeta: b.iter().zip(&mu).map(|(b, m)| k * (m - b)).collect(),
            eta: a.iter().zip(&mu).map(|(a, m)| k * (m - a)).collect(),
        };
        (v.clone(), v.clone(), Some(primed))
    } else {
        (prof.pos_dev.clone(), prof.neg_dev.clone(), None)
    };
    let lines = SlabLines {
        alpha: mu.iter().zip(&pos).map(|(m, x)| m - lam * x).collect(),
        beta: mu.iter().zip(&neg).map(|(m, x)| m + lam * x).collect(),
        zeta: pos.iter().map(|x| (n0 - k) * x).collect(),
        eta: neg.iter().map(|x| (k - n0) * x).collect(),
    };
    let slab = match Slab::new(lines, primed) {
        Ok(s) => s,
        Err(e) => return r.fail("slab", &e),
    };
    if !slab.is_ordered() {
        r.note("slab lines are not ordered (zeta > eta); the slab is still nonempty at large t");
    }
    r.diag("slab_ordered", f64::from(u8::from(slab.is_ordered())));
    let region = p.continuity();
    match max_t_over_slab(&region, &slab, p.options.t_cap, p.options.tol) {
        Ok(res) if res.empty => {
            r.assume("slab", AssumptionStatus::Fail, "slab never meets the region");
        }
        Ok(res) => {
            r.diag("M_bound", res.value);
            if res.unbounded {
                r.note("slab stays inside the region up to the search cap");
            }
            r.value = Some(if res.value.is_finite() { lam * res.value + k } else { f64::INFINITY });
        }
        Err(e) => return r.fail("slab", &e),
    }
    r
}

/// The function `g` of a sample-mean rule: configured explicitly or read off the region.
/// `K + max g` (or `2 + max g` on all naturals) over a box around the mean.
pub fn sample_mean_bound(p: &Problem, tag: TheoremTag) -> BoundReport {
    let mut r = BoundReport::new(tag);
    let Some(g) = sample_mean_g(p) else {
        r.check("rule", false, "not a sample-mean rule t >= g(s/t)");
        return r;
    };
    if p.profile.dim() != 1 {
        r.check("scalar", false, "sample-mean rules are implemented for scalar increments");
        return r;
    }
    let mu = p.profile.mean[0];
    r.check("concave", g.is_concave(), format!("{} is concave", g.label()));
    let g_mu = g.value(mu);
    r.diag("g_mu", g_mu);
    r.check("g-finite", g_mu.is_finite(), "g is finite at the mean");
    r.check("VI", p.profile.third_moment_finite(), "third absolute moments finite");

    let (lo, hi, offset) = match tag {
        TheoremTag::T13SampleMeanNaturals => {
            r.check("naturals", p.schedule.is_all_naturals(), "stopping allowed at every n");
            // concave and nonnegative on the support, checked at its endpoints
            let nonneg = match p.profile.support() {
                Some((a, b)) => g.value(a[0]) >= 0.0 && g.value(b[0]) >= 0.0,
                None => matches!(g, GFun::Constant { c } if c >= 0.0),
            };
            let status = if nonneg { AssumptionStatus::Pass } else { AssumptionStatus::Unchecked };
            r.assume("nonnegative", status, "g >= 0 on the range of the sample mean");
            (mu - p.profile.pos_dev[0], mu + p.profile.neg_dev[0], 2.0)
        }
        _ => {
            let k = gap_constant(&mut r, p, &g);
            let (pos, neg) = if tag == TheoremTag::Try88Bounded {
                let Some(v) = &p.profile.bound_v else {
                    r.check("support", false, "requires bounded support");
                    return r;
                };
                r.check("support", true, "support bounds available");
                (v[0], v[0])
            } else {
                (p.profile.pos_dev[0], p.profile.neg_dev[0])
            };
            let (lo, hi) = (mu - pos, mu + neg);
            (lo, hi, k)
        }
    };
    r.diag("box_lo", lo);
    r.diag("box_hi", hi);
    let f = |x: &[f64]| g.value(x[0]);
    match max_concave_over_box(&f, &[lo], &[hi], p.options.tol) {
        Ok(best) => {
            r.diag("max_g", best.value);
            r.diag("argmax", best.argmax[0]);
            r.value = Some(offset + best.value);
        }
        Err(e) => return r.fail("box", &e),
    }
    r
}

/// Checks `N_{ℓ+1} - N_ℓ ≤ K ≤ N_0` and the sure start `N_0 < g(X̄_{N_0})`; returns `K`.
fn gap_constant(r: &mut BoundReport, p: &Problem, g: &GFun) -> f64 {
    let n0 = p.schedule.n0();
    let Some(k) = p.schedule.max_gap() else {
        r.check("gaps", false, "schedule gaps are unbounded");
        return f64::NAN;
    };
    r.diag("K", k as f64);
    r.check("gaps", k >= 1 && k <= n0, format!("max gap {k} and N0 = {n0} need 1 <= K <= N0"));
    let start = p.profile.support().map(|(a, b)| {
        // a concave g attains its minimum over [a, b] at an endpoint
        g.value(a[0]).min(g.value(b[0])) > n0 as f64
    });
    match (start, p.initial_containment) {
        (Some(true), _) => r.assume("IV", AssumptionStatus::Pass, "N0 < g on the whole support"),
        (_, Some(true)) => r.assume("IV", AssumptionStatus::Declared, "declared in configuration"),
        (Some(false), _) | (_, Some(false)) => {
            r.assume("IV", AssumptionStatus::Fail, "N0 < g(sample mean at N0) can fail")
        }
        (None, None) => r.assume("IV", AssumptionStatus::Unchecked, "not declared"),
    }
    k as f64
}

/// `1/g(μ)` for the rule that stops once `n·g(X̄_n) ≥ 1`.
pub fn wald_lower_bound(p: &Problem) -> BoundReport {
    let mut r = BoundReport::new(TheoremTag::UseWaldLower);
    let Some(g) = reciprocal_g(p) else {
        r.check("rule", false, "not a rule of the form t*g(s/t) >= 1");
        return r;
    };
    if p.profile.dim() != 1 {
        r.check("scalar", false, "implemented for scalar increments");
        return r;
    }
    let g_mu = g.value(p.profile.mean[0]);
    r.diag("g_mu", g_mu);
    r.check("concave", g.is_concave(), format!("{} is concave", g.label()));
    r.check("positive", g_mu > 0.0, "g(mu) > 0");
    if g_mu > 0.0 {
        r.value = Some(1.0 / g_mu);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::super::compute_bound;
    use super::*;
    use crate::geometry::{Boundary, Region, RegionKind, Side};
    use crate::moments::{DistributionSpec, ScalarFamily};
    use crate::schedules::Schedule;

    fn point(v: f64) -> DistributionSpec {
        DistributionSpec::Scalar(ScalarFamily::PointMass { value: v })
    }

    fn fair() -> DistributionSpec {
        DistributionSpec::Scalar(ScalarFamily::BernoulliAffine { x0: 0.0, x1: 1.0, p: 0.5 })
    }

    fn stop_above(slope: f64, intercept: f64) -> Region {
        Region::scalar(Boundary::Affine { slope, intercept }, Side::Above, RegionKind::Stopping).unwrap()
    }

    #[test]
    fn entry_time_of_stopping_region() {
        let p = Problem::new(point(2.0), stop_above(1.0, 10.0), Schedule::all_naturals()).unwrap();
        let r = lower_bound_stopping(&p);
        assert_eq!(r.value, Some(10.0));
        assert!(r.applicable());

        let p = Problem::new(point(1.0), stop_above(1.0, 10.0), Schedule::all_naturals()).unwrap();
        assert_eq!(lower_bound_stopping(&p).value, Some(f64::INFINITY));

        let at_zero = Region::scalar(Boundary::Constant { c: 0.0 }, Side::Above, RegionKind::Stopping).unwrap();
        let p = Problem::new(point(1.0), at_zero, Schedule::all_naturals()).unwrap();
        assert_eq!(lower_bound_stopping(&p).value, Some(0.0));
    }

    #[test]
    fn degenerate_slab_follows_mean_ray() {
        let region = Region::scalar(Boundary::Constant { c: 5.0 }, Side::Below, RegionKind::Continuity).unwrap();
        let p = Problem::new(point(1.0), region, Schedule::all_naturals()).unwrap();
        let r = upper_bound_via_m(&p, false);
        assert!((r.diagnostics["M_bound"] - 5.0).abs() < 1e-9, "{r:?}");
        assert!((r.value.unwrap() - 6.0).abs() < 1e-9);
        assert!(r.applicable(), "{r:?}");
    }

    #[test]
    fn slab_bound_without_exit_is_infinite() {
        let region =
            Region::scalar(Boundary::Affine { slope: 1.0, intercept: 1.0 }, Side::Below, RegionKind::Continuity)
                .unwrap();
        let spec = DistributionSpec::Scalar(ScalarFamily::BernoulliAffine { x0: 0.0, x1: 1.0, p: 0.5 });
        let p = Problem::new(spec, region, Schedule::all_naturals()).unwrap();
        let r = upper_bound_via_m(&p, false);
        assert_eq!(r.value, Some(f64::INFINITY));
        assert!(!r.applicable());
    }

    #[test]
    fn sample_mean_examples() {
        let rule = Region::sample_mean(GFun::reciprocal(5.0), RegionKind::Stopping);
        let p = Problem::new(point(1.0), rule.clone(), Schedule::all_naturals()).unwrap();
        let r = compute_bound(TheoremTag::T13SampleMeanNaturals, &p);
        assert!((r.value.unwrap() - 7.0).abs() < 1e-12);
        // 5/θ is convex, so the hypotheses fail
        assert!(!r.applicable());

        let sched = Schedule::arithmetic(1, 1).unwrap();
        let p = Problem::new(fair(), rule, sched.clone()).unwrap();
        let r = compute_bound(TheoremTag::Try88Bounded, &p);
        assert!((r.value.unwrap() - 21.0).abs() < 1e-9, "{r:?}");

        let constant = Region::sample_mean(GFun::Constant { c: 4.0 }, RegionKind::Stopping);
        for spec in [point(0.3), fair()] {
            let p = Problem::new(spec, constant.clone(), sched.clone()).unwrap();
            for tag in [TheoremTag::T12SampleMean, TheoremTag::Try88Bounded] {
                let r = compute_bound(tag, &p);
                assert!((r.value.unwrap() - 5.0).abs() < 1e-12, "{tag}: {r:?}");
            }
        }
    }

    #[test]
    fn wald_examples() {
        let cases = [
            (GFun::Linear { intercept: 0.0, slope: 1.0 }, 0.25, 4.0),
            (GFun::Capped { slope: 1.0, cap: 1.0 }, 0.5, 2.0),
            (GFun::Sqrt { c: 1.0 }, 0.25, 2.0),
        ];
        for (g, mu, want) in cases {
            let p = Problem::new(point(mu), Region::reciprocal_rule(g), Schedule::all_naturals()).unwrap();
            let r = wald_lower_bound(&p);
            assert!((r.value.unwrap() - want).abs() < 1e-12);
            assert!(r.applicable());
        }
        let p = Problem::new(
            point(-1.0),
            Region::reciprocal_rule(GFun::Linear { intercept: 0.0, slope: 1.0 }),
            Schedule::all_naturals(),
        )
        .unwrap();
        assert!(!wald_lower_bound(&p).applicable());
    }
}
