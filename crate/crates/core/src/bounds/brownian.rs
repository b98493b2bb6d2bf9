use super::{
    crossing_assumption, reciprocal_g, region_assumption, sample_mean_g, AssumptionStatus, BoundReport, Problem,
    TheoremTag,
};
use crate::geometry::{audit_convexity, TIGHT_TOL};

/// Bounds on the exit time of Brownian motion with drift `μ` (the increment mean).
pub fn brownian_bound(p: &Problem, tag: TheoremTag) -> BoundReport {
    let mut r = BoundReport::new(tag);
    match tag {
        TheoremTag::Brown1 => {
            region_assumption(&mut r, p);
            if let Some(m) = crossing_assumption(&mut r, p) {
                r.value = Some(m);
            }
        }
        TheoremTag::Brown2Lower | TheoremTag::Brown2Upper => {
            let stop = p.stopping();
            let convex =
                stop.is_convex() && audit_convexity(&stop, p.mu(), 100.0, p.options.convexity_trials, 17).is_none();
            r.check("stopping-convex", convex, "closed stopping region is convex");
            if tag == TheoremTag::Brown2Upper {
                r.assume("finite-mean", AssumptionStatus::Unchecked, "E[T] < infinity is assumed");
            }
            match stop.ray_interval(p.mu(), TIGHT_TOL) {
                Ok(None) => {
                    r.note("mean ray never enters the stopping region; E[T] is infinite");
                    r.value = Some(f64::INFINITY);
                }
                Ok(Some(iv)) => {
                    r.diag("entry", iv.lo);
                    r.diag("exit", iv.hi);
                    r.value = Some(if tag == TheoremTag::Brown2Lower { iv.lo } else { iv.hi });
                }
                Err(e) => return r.fail("ray", &e),
            }
        }
        _ => {
            let g = if tag == TheoremTag::Brown3 { sample_mean_g(p) } else { reciprocal_g(p) };
            let Some(g) = g else {
                let form = if tag == TheoremTag::Brown3 { "t >= g(W/t)" } else { "t*g(W/t) >= 1" };
                r.check("rule", false, format!("not a rule of the form {form}"));
                return r;
            };
            if p.profile.dim() != 1 {
                r.check("scalar", false, "implemented for scalar drift");
                return r;
            }
            let g_mu = g.value(p.profile.mean[0]);
            r.diag("g_mu", g_mu);
            r.check("concave", g.is_concave(), format!("{} is concave", g.label()));
            r.check("positive", g_mu > 0.0 && g_mu.is_finite(), "0 < g(mu) < infinity");
            if g_mu > 0.0 {
                r.value = Some(if tag == TheoremTag::Brown3 { g_mu } else { 1.0 / g_mu });
            }
        }
    }
    r
}
