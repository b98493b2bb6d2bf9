use super::sums::{expect_over, SumLaw};
use super::{AssumptionStatus, BoundReport, Problem, TheoremTag};
use crate::moments::ScalarFamily;
use crate::rng::aux_stream;

/// Draws used when the partial-sum law has no closed form.
const FALLBACK_DRAWS: usize = 1_000_000;

fn scalar_inputs<'a>(r: &mut BoundReport, p: &'a Problem) -> Option<(&'a ScalarFamily, &'a ScalarFamily)> {
    let comps = p.spec.components();
    if comps.len() != 1 {
        r.check("scalar", false, "overshoot bounds need scalar increments");
        return None;
    }
    let Some(law) = p.threshold.as_ref() else {
        r.check("threshold", false, "no threshold law configured");
        return None;
    };
    let z = &comps[0];
    r.check("positive-drift", z.mean() > 0.0, "E[Z] > 0");
    r.check("second-moment", z.second_moment().is_finite(), "E[Z^2] finite");
    Some((z, law))
}

/// `E[(Z^+)^2]/E[Z]·Pr{Z < λ} + E[(Z - λ)^+]`.
pub fn lorden_t6(p: &Problem) -> BoundReport {
    let mut r = BoundReport::new(TheoremTag::LordenT6);
    let Some((z, law)) = scalar_inputs(&mut r, p) else { return r };
    let mean = z.mean();
    let pos_sq = z.affine_pos_second_moment(1.0, 0.0);
    let (below, q1) = expect_over(law, &|x| z.prob_below(x));
    let (excess, q2) = expect_over(law, &|x| z.excess_mean(x));
    if q1 || q2 {
        r.note("threshold expectations by quadrature");
    }
    r.diag("prob_below", below);
    r.diag("excess", excess);
    r.value = Some(pos_sq / mean * below + excess);
    r
}

/// `((K-1)E[Z] + E[Z^2]/E[Z])·Pr{Y < λ} + E[(Y - λ)^+]` with `Y` the sum of the first `N_1` terms.
pub fn lorden_t7(p: &Problem) -> BoundReport {
    let mut r = BoundReport::new(TheoremTag::LordenT7);
    let Some((z, law)) = scalar_inputs(&mut r, p) else { return r };
    r.check("strictly-positive", z.is_positive(), "Z > 0 surely");
    let Some(k) = p.schedule.max_gap() else {
        r.check("gaps", false, "schedule gaps are unbounded");
        return r;
    };
    let Some(n1) = p.schedule.element(1) else {
        r.check("gaps", false, "schedule has no first stopping opportunity");
        return r;
    };
    r.check("gaps", true, format!("max gap K = {k}, N1 = {n1}"));
    r.diag("K", k as f64);
    r.diag("N1", n1 as f64);
    let mean = z.mean();
    let coef = (k as f64 - 1.0) * mean + z.second_moment() / mean;

    let (below, excess) = match SumLaw::of(z, n1) {
        Some(y) => {
            let (below, q1) = expect_over(law, &|x| y.prob_below(x));
            let (excess, q2) = expect_over(law, &|x| y.excess_mean(x));
            if q1 || q2 {
                r.note("threshold expectations by quadrature");
            }
            (below, excess)
        }
        None => {
            let (below, excess) = simulated_terms(z, law, n1);
            r.assume(
                "estimated",
                AssumptionStatus::Empirical,
                "partial-sum terms estimated by simulation with 4-sigma inflation",
            );
            r.diag("estimated", 1.0);
            (below, excess)
        }
    };
    r.diag("prob_below", below);
    r.diag("excess", excess);
    r.value = Some(coef * below + excess);
    r
}

/// Upper confidence limits for `Pr{Y < λ}` and `E[(Y - λ)^+]`.
fn simulated_terms(z: &ScalarFamily, law: &ScalarFamily, n: u64) -> (f64, f64) {
    let mut rng = aux_stream(n, 0x7);
    let (mut hits, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for _ in 0..FALLBACK_DRAWS {
        let lam = law.sample(&mut rng);
        let y: f64 = (0..n).map(|_| z.sample(&mut rng)).sum();
        hits += f64::from(y < lam);
        let e = (y - lam).max(0.0);
        s1 += e;
        s2 += e * e;
    }
    let draws = FALLBACK_DRAWS as f64;
    let p = hits / draws;
    let p_up = (p + 4.0 * (p * (1.0 - p) / draws).sqrt()).min(1.0);
    let mean = s1 / draws;
    let sd = ((s2 / draws - mean * mean).max(0.0) / draws).sqrt();
    (p_up, mean + 4.0 * sd)
}
