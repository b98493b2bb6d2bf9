use super::sums::SumLaw;
use super::{
    crossing_assumption, region_assumption, standard_assumptions, AssumptionStatus, BoundReport, Problem, TheoremTag,
};
use crate::geometry::{dot, Hyperplane};
use crate::optimize::{vertex_fraction_max, SlabLines};
use crate::schedules::ScheduleKind;

fn record_plane(r: &mut BoundReport, hyp: &Hyperplane) {
    r.diag("B", hyp.b);
    r.diag("C", hyp.c);
    r.diag("A_norm", hyp.a_norm());
    if hyp.a.len() == 1 {
        r.diag("A", hyp.a[0]);
    }
}

/// `E[M]` bound from the vertex maximization over one set of slab lines.
fn vertex_bound(hyp: &Hyperplane, lines: &SlabLines) -> crate::error::Result<f64> {
    vertex_fraction_max(&hyp.a, hyp.b, hyp.c, lines).map(|v| v.value)
}

/// Slab lines of the moment (unprimed) form with deviation vectors `pos`/`neg`.
fn moment_lines(mu: &[f64], pos: &[f64], neg: &[f64], lam: f64, k: f64, n0: f64) -> SlabLines {
    SlabLines {
        alpha: mu.iter().zip(pos).map(|(m, x)| m - lam * x).collect(),
        beta: mu.iter().zip(neg).map(|(m, x)| m + lam * x).collect(),
        zeta: pos.iter().map(|x| (n0 - k) * x).collect(),
        eta: neg.iter().map(|x| (k - n0) * x).collect(),
    }
}

/// `λ·E[M] + K` with `E[M]` bounded through the supporting hyperplane at `(m, mμ)`.
/// The bounded variant evaluates both slabs and keeps the smaller value.
pub fn hyperplane_bound(p: &Problem, bounded: bool) -> BoundReport {
    let tag = if bounded { TheoremTag::T15HyperplaneBounded } else { TheoremTag::T14Hyperplane };
    let mut r = BoundReport::new(tag);
    standard_assumptions(&mut r, p);
    let hyp = match p.hyperplane() {
        Ok(h) => h,
        Err(e) => return r.fail("hyperplane", &e),
    };
    record_plane(&mut r, &hyp);
    let prof = &p.profile;
    let mu = &prof.mean;
    let (lam, k, n0) = (p.schedule.lambda, p.schedule.k, p.schedule.n0() as f64);

    let candidates: Vec<(&str, SlabLines)> = if bounded {
        let (Some((a, b)), Some(v)) = (prof.support(), prof.bound_v.as_ref()) else {
            r.check("support", false, "requires bounded support");
            return r;
        };
        r.check("support", true, "support bounds available");
        let primed = SlabLines {
            alpha: b.iter().zip(mu).map(|(b, m)| b + lam * (m - b)).collect(),
            beta: a.iter().zip(mu).map(|(a, m)| a + lam * (m - a)).collect(),
            zeta: b.iter().zip(mu).map(|(b, m)| k * (m - b)).collect(),
            eta: a.iter().zip(mu).map(|(a, m)| k * (m - a)).collect(),
        };
        vec![("unprimed", moment_lines(mu, v, v, lam, k, n0)), ("primed", primed)]
    } else {
        vec![("moment", moment_lines(mu, &prof.pos_dev, &prof.neg_dev, lam, k, n0))]
    };

    let mut best: Option<(usize, f64)> = None;
    for (i, (name, lines)) in candidates.iter().enumerate() {
        match vertex_bound(&hyp, lines) {
            Ok(v) => {
                r.diag(&format!("M_bound_{name}"), v);
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((i, v));
                }
            }
            Err(e) => r.note(format!("{name} slab: {e}")),
        }
    }
    match best {
        Some((i, v)) => {
            r.check("proviso", true, "vertex denominators positive");
            if bounded {
                r.diag("winner_primed", i as f64);
                r.note(format!("{} slab gives the smaller bound", candidates[i].0));
            }
            r.diag("M_bound", v);
            r.value = Some(lam * v + k);
        }
        None => {
            r.check("proviso", false, "vertex denominators not positive on any slab");
        }
    }
    r
}

/// Step `K` of a schedule `{0, K, 2K, ...}`.
fn lattice_step(p: &Problem) -> Option<u64> {
    match p.schedule.kind {
        ScheduleKind::AllNaturals => Some(1),
        ScheduleKind::Arithmetic { n0: 0, step } => Some(step),
        _ => None,
    }
}

/// The three assertions for schedules `{0, K, 2K, ...}`.
pub fn chen_lorden_bound(p: &Problem, tag: TheoremTag) -> BoundReport {
    let mut r = BoundReport::new(tag);
    let Some(step) = lattice_step(p) else {
        r.check("lattice", false, "schedule must be the multiples of a step K");
        return r;
    };
    r.check("lattice", true, format!("multiples of {step}"));
    region_assumption(&mut r, p);
    let Some(m) = crossing_assumption(&mut r, p) else { return r };
    r.check("second-moment", true, "increments have finite variance");
    let hyp = match p.hyperplane() {
        Ok(h) => h,
        Err(e) => return r.fail("hyperplane", &e),
    };
    record_plane(&mut r, &hyp);
    let prof = &p.profile;
    let k = step as f64;
    let scale = (m / hyp.c).powi(2);
    let weighted: f64 = hyp.a.iter().zip(&prof.variance).map(|(a, v)| a * a * v).sum();

    match tag {
        TheoremTag::T16ChenLordenI => {
            let third = m + k + scale * hyp.a_norm().powi(2) * prof.total_variance();
            let second = m + k + scale * weighted;
            r.diag("chain_second", second);
            r.diag("chain_third", third);
            if let (1, Some(law)) = (prof.dim(), SumLaw::of(&p.spec.components()[0], step)) {
                let (a, bk) = (hyp.a[0], hyp.b * k);
                let zsq = law.expect(&|y| (bk + a * y).max(0.0).powi(2));
                r.diag("chain_first", m + scale * zsq / k);
            }
            r.value = Some(third);
        }
        TheoremTag::T16ChenLordenII => {
            r.check("independent", prof.independent, "components are independent");
            r.note("A^2 weights the per-component variances elementwise");
            r.value = Some(m + k + scale * weighted);
        }
        _ => {
            let Some((lo, hi)) = prof.support() else {
                r.check("support", false, "requires bounded support");
                return r;
            };
            r.check("support", true, "support bounds available");
            let mut u = hyp.b;
            let mut v = hyp.b;
            for ((a, l), h) in hyp.a.iter().zip(lo).zip(hi) {
                u += (a * l).min(a * h);
                v += (a * l).max(a * h);
            }
            r.diag("u", u);
            r.diag("v", v);
            let c = hyp.c;
            let general = m + k * m * (u + v) / c - k * m * m * u * v / (c * c);
            r.diag("general", general);
            let mut value = general;
            if u < 0.0 && v > u {
                let special = m + k * v * v / (v - u) * scale * (c / m - u);
                r.diag("negative_u", special);
                value = value.min(special);
            }
            r.value = Some(value);
        }
    }
    r
}

/// `g(μ) + 1 + E[⟨∇, X - μ⟩²]` for rules that may stop at every `n`.
pub fn gradient_bound(p: &Problem) -> BoundReport {
    let mut r = BoundReport::new(TheoremTag::T17Gradient);
    r.check("naturals", p.schedule.is_all_naturals(), "stopping allowed at every n");
    region_assumption(&mut r, p);
    let Some(m) = crossing_assumption(&mut r, p) else { return r };
    let grad = match p.continuity().grad_log_g(p.mu(), p.options.grad_step) {
        Ok(g) => g,
        Err(e) => return r.fail("gradient", &e),
    };
    r.check("differentiable", true, "g differentiable near the mean");
    let prof = &p.profile;
    let quad: f64 = grad.iter().zip(&prof.variance).map(|(g, v)| g * g * v).sum();
    r.diag("grad_norm", dot(&grad, &grad).sqrt());
    r.diag("loose", m + 1.0 + dot(&grad, &grad) * prof.total_variance());
    if let Some(v) = vip_value(p, m) {
        r.diag("vipformula", v);
    }
    r.value = Some(m + 1.0 + quad);
    r
}

fn vip_value(p: &Problem, m: f64) -> Option<f64> {
    let (f, _) = p.continuity().scalar_boundary()?;
    let slope = f.derivative(m) - p.profile.mean[0];
    Some(m + 1.0 + p.profile.variance[0] / (slope * slope))
}

/// `m + 1 + σ² / (f'(m) - μ)²` for a scalar boundary `f`.
pub fn vip_formula(p: &Problem) -> BoundReport {
    let mut r = BoundReport::new(TheoremTag::VipFormula);
    if p.continuity().scalar_boundary().is_none() {
        r.check("scalar-boundary", false, "needs a region bounded by a scalar curve s = f(t)");
        return r;
    }
    r.check("naturals", p.schedule.is_all_naturals(), "stopping allowed at every n");
    region_assumption(&mut r, p);
    let Some(m) = crossing_assumption(&mut r, p) else { return r };
    match vip_value(p, m) {
        Some(v) if v.is_finite() => r.value = Some(v),
        _ => r.assume("slope", AssumptionStatus::Fail, "f'(m) equals the mean"),
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Boundary, Region, RegionKind, Side};
    use crate::moments::{DistributionSpec, ScalarFamily};
    use crate::schedules::Schedule;

    fn fair() -> DistributionSpec {
        DistributionSpec::Scalar(ScalarFamily::BernoulliAffine { x0: 0.0, x1: 1.0, p: 0.5 })
    }

    fn below(b: Boundary) -> Region {
        Region::scalar(b, Side::Below, RegionKind::Continuity).unwrap()
    }

    fn stop_at_five() -> Problem {
        let region = Region::scalar(Boundary::Constant { c: 5.0 }, Side::Above, RegionKind::Stopping).unwrap();
        Problem::new(fair(), region, Schedule::all_naturals()).unwrap()
    }

    #[test]
    fn fair_coin_reaching_five() {
        let p = stop_at_five();
        let ii = chen_lorden_bound(&p, TheoremTag::T16ChenLordenII);
        assert_eq!(ii.value, Some(12.0));
        assert!(ii.applicable(), "{ii:?}");
        let iii = chen_lorden_bound(&p, TheoremTag::T16ChenLordenIII);
        assert!((iii.value.unwrap() - 12.0).abs() < 1e-12);
        let vip = vip_formula(&p);
        assert_eq!(vip.value, Some(12.0));
        let grad = gradient_bound(&p);
        assert!((grad.value.unwrap() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn chen_lorden_chain_is_monotone() {
        let p = stop_at_five();
        let r = chen_lorden_bound(&p, TheoremTag::T16ChenLordenI);
        let d = &r.diagnostics;
        assert!(d["chain_first"] <= d["chain_second"] + 1e-9, "{d:?}");
        assert!(d["chain_second"] <= d["chain_third"] + 1e-12);
        assert_eq!(r.value, Some(d["chain_third"]));
    }

    #[test]
    fn point_mass_collapses_to_m_plus_k() {
        let spec = DistributionSpec::Scalar(ScalarFamily::PointMass { value: 1.0 });
        let p = Problem::new(spec, below(Boundary::Constant { c: 5.0 }), Schedule::arithmetic(0, 2).unwrap()).unwrap();
        let r = chen_lorden_bound(&p, TheoremTag::T16ChenLordenI);
        assert!((r.value.unwrap() - 7.0).abs() < 1e-12);

        let p = Problem::new(
            DistributionSpec::Scalar(ScalarFamily::PointMass { value: 1.0 }),
            below(Boundary::Power { c: 2.0, gamma: 0.5 }),
            Schedule::all_naturals(),
        )
        .unwrap();
        assert!((gradient_bound(&p).value.unwrap() - 5.0).abs() < 1e-9);

        let p = Problem::new(
            DistributionSpec::Scalar(ScalarFamily::PointMass { value: 1.0 }),
            below(Boundary::Constant { c: 5.0 }),
            Schedule::all_naturals(),
        )
        .unwrap();
        let r = hyperplane_bound(&p, false);
        assert!((r.diagnostics["M_bound"] - 5.0).abs() < 1e-12);
        assert!((r.value.unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn square_root_boundary_vip() {
        let p = Problem::new(fair(), below(Boundary::Power { c: 2.0, gamma: 0.5 }), Schedule::all_naturals()).unwrap();
        let r = vip_formula(&p);
        assert!((r.value.unwrap() - 21.0).abs() < 1e-9);
        assert!(r.applicable());
    }

    #[test]
    fn two_vertex_arithmetic() {
        let hyp = Hyperplane { a: vec![1.0], b: 0.0, c: 5.0, m: 5.0 };
        let lines = SlabLines { alpha: vec![0.9], beta: vec![1.1], zeta: vec![-0.5], eta: vec![0.5] };
        let v = vertex_bound(&hyp, &lines).unwrap();
        assert!((v - 55.0 / 9.0).abs() < 1e-12);
        assert!((v + 1.0 - 64.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn bounded_variant_needs_support() {
        let spec = DistributionSpec::Scalar(ScalarFamily::Gaussian { mean: 0.5, sd: 1.0 });
        let p = Problem::new(spec, below(Boundary::Constant { c: 5.0 }), Schedule::all_naturals()).unwrap();
        let r = hyperplane_bound(&p, true);
        assert!(!r.applicable());
        assert_eq!(r.status_of("support"), Some(AssumptionStatus::Fail));
    }
}
