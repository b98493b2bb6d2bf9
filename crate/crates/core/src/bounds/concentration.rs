use serde::{Deserialize, Serialize};

use super::{standard_assumptions, AssumptionStatus, BoundReport, Problem, TheoremTag};
use crate::error::{Error, Result};
use crate::geometry::{Hyperplane, Region, Shape, Side, RAY_CAP};
use crate::moments::ScalarFamily;
use crate::optimize::golden_max;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailKind {
    Hoeffding,
    Chernoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConcentrationVariant {
    /// Scalar one-sided form when its side condition holds, else the vector form.
    Auto,
    Vector,
    ScalarAbove,
    ScalarBelow,
}

/// Hoeffding bound on `Pr{X̄_n - μ ≥ dev}` for `X` in an interval of length `width`,
/// doubled when `two_sided`, capped at one.
pub fn hoeffding_tail(n: f64, dev: f64, width: f64, two_sided: bool) -> f64 {
    if dev <= 0.0 {
        return 1.0;
    }
    if width <= 0.0 {
        return 0.0;
    }
    let one = (-2.0 * n * dev * dev / (width * width)).exp();
    (if two_sided { 2.0 * one } else { one }).min(1.0)
}

/// Chernoff bound `exp(-n·I)` on `Pr{X̄_n ≥ μ + dev}` (`upper`) or `Pr{X̄_n ≤ μ - dev}`,
/// with the rate `I` maximized numerically over the tilt.
pub fn chernoff_tail(fam: &ScalarFamily, n: f64, dev: f64, upper: bool) -> f64 {
    if dev <= 0.0 {
        return 1.0;
    }
    let sign = if upper { 1.0 } else { -1.0 };
    let target = fam.mean() + sign * dev;
    let rate = |th: f64| sign * th * target - fam.log_mgf(sign * th);
    let limit = if upper { fam.mgf_theta_limit() } else { f64::INFINITY };
    let mut hi = if limit.is_finite() { limit * (1.0 - 1e-12) } else { 1.0 };
    if !limit.is_finite() {
        while hi < 1e12 && rate(2.0 * hi) > rate(hi) {
            hi *= 2.0;
        }
        hi *= 2.0;
    }
    let (_, best) = golden_max(&rate, 0.0, hi, 1e-12);
    let best = best.max(rate(hi)).max(0.0);
    (-n * best).exp().min(1.0)
}

/// `inf` and `sup` of the slice `{z : (n, n z) ∈ R̄}` of a scalar region.
fn slice_bounds(region: &Region, n: f64) -> Result<(f64, f64)> {
    if region.has_hooks() {
        match (region.shape(), region.side()) {
            (Shape::Scalar(b), Side::Below) => return Ok((f64::NEG_INFINITY, b.value(n) / n)),
            (Shape::Scalar(b), Side::Above) => return Ok((b.value(n) / n, f64::INFINITY)),
            (Shape::Halfspace { a, b, c }, side) if a.len() == 1 && a[0] != 0.0 => {
                let edge = (c / n - b) / a[0];
                let below_edge = (a[0] > 0.0) == (side == Side::Below);
                return Ok(if below_edge { (f64::NEG_INFINITY, edge) } else { (edge, f64::INFINITY) });
            }
            _ => {}
        }
    }
    let member = |z: f64| region.contains(n, &[n * z]);
    let mut seed = None;
    'search: for k in -30..=60 {
        let step = 2f64.powi(k);
        for z in [step, -step, 0.0] {
            if member(z) {
                seed = Some(z);
                break 'search;
            }
        }
    }
    let z0 = seed.ok_or(Error::EmptySlice { n: n as u64 })?;
    let edge = |dir: f64| {
        let mut step = 1.0;
        while step < RAY_CAP && member(z0 + dir * step) {
            step *= 2.0;
        }
        if step >= RAY_CAP {
            return dir * f64::INFINITY;
        }
        let (mut inside, mut outside) = (z0 + dir * step * 0.5 * f64::from(step > 1.0), z0 + dir * step);
        if !member(inside) {
            inside = z0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if member(mid) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    Ok((edge(-1.0), edge(1.0)))
}

fn halfspace_slice(hyp: &Hyperplane, n: f64) -> (f64, f64) {
    let edge = (hyp.c / n - hyp.b) / hyp.a[0];
    if hyp.a[0] > 0.0 {
        (f64::NEG_INFINITY, edge)
    } else {
        (edge, f64::INFINITY)
    }
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Consecutive sub-floor terms needed before the series is cut.
const QUIET_TERMS: u32 = 8;

/// `N_τ + Σ_{ℓ≥τ} (N_{ℓ+1} - N_ℓ)·Pr{deviation at N_ℓ}` with deviations from the
/// region slice (or from the supporting hyperplane when `via_plane`).
pub fn concentration_bound(p: &Problem, via_plane: bool) -> BoundReport {
    let tag = if via_plane { TheoremTag::T19ConcentrationHyperplane } else { TheoremTag::T18Concentration };
    let mut r = BoundReport::new(tag);
    let Some(m) = standard_assumptions(&mut r, p) else { return r };
    let prof = &p.profile;
    let d = prof.dim();
    let tail = p.options.tail;
    let widths: Option<Vec<f64>> = prof.support().map(|(a, b)| a.iter().zip(b).map(|(a, b)| b - a).collect());
    if tail == TailKind::Hoeffding {
        r.check("support", widths.is_some(), "Hoeffding tails need bounded support");
        if widths.is_none() {
            return r;
        }
    }
    let region = p.continuity();
    let hyp = if via_plane {
        match p.hyperplane() {
            Ok(h) => {
                r.diag("C", h.c);
                r.diag("A_norm", h.a_norm());
                Some(h)
            }
            Err(e) => return r.fail("hyperplane", &e),
        }
    } else {
        None
    };
    let (tau, n_tau) = match p.schedule.tau_index(m) {
        Ok(x) => x,
        Err(e) => return r.fail("schedule", &e),
    };
    r.diag("tau", tau as f64);
    r.diag("N_tau", n_tau as f64);

    let mu = prof.mean.clone();
    let variant = match p.options.concentration {
        ConcentrationVariant::Vector => ConcentrationVariant::Vector,
        requested if d == 1 => {
            let slice = match &hyp {
                Some(h) => Ok(halfspace_slice(h, n_tau as f64)),
                None => slice_bounds(&region, n_tau as f64),
            };
            let (inf, sup) = match slice {
                Ok(x) => x,
                Err(e) => return r.fail("slice", &e),
            };
            r.diag("slice_inf", inf);
            r.diag("slice_sup", sup);
            let above_ok = mu[0] < inf;
            let below_ok = mu[0] > sup;
            match requested {
                ConcentrationVariant::ScalarAbove => {
                    r.check("side", above_ok, "mean lies below the slice at N_tau");
                    ConcentrationVariant::ScalarAbove
                }
                ConcentrationVariant::ScalarBelow => {
                    r.check("side", below_ok, "mean lies above the slice at N_tau");
                    ConcentrationVariant::ScalarBelow
                }
                _ if above_ok => ConcentrationVariant::ScalarAbove,
                _ if below_ok => ConcentrationVariant::ScalarBelow,
                _ => ConcentrationVariant::Vector,
            }
        }
        ConcentrationVariant::Auto => ConcentrationVariant::Vector,
        _ => {
            r.check("side", false, "scalar forms need scalar increments");
            return r;
        }
    };
    r.note(format!("variant {variant:?}, {tail:?} tails"));

    let comps = p.spec.components();
    let prob = |n: f64, dev: f64| -> f64 {
        let one = |k: usize, dev: f64, upper: bool| match tail {
            TailKind::Hoeffding => hoeffding_tail(n, dev, widths.as_ref().unwrap()[k], false),
            TailKind::Chernoff => chernoff_tail(&comps[k], n, dev, upper),
        };
        match variant {
            ConcentrationVariant::ScalarAbove => one(0, dev, true),
            ConcentrationVariant::ScalarBelow => one(0, dev, false),
            _ => {
                let per = dev / (d as f64).sqrt();
                let total: f64 = (0..d)
                    .map(|k| match tail {
                        TailKind::Hoeffding => hoeffding_tail(n, per, widths.as_ref().unwrap()[k], true),
                        TailKind::Chernoff => (one(k, per, true) + one(k, per, false)).min(1.0),
                    })
                    .sum();
                total.min(1.0)
            }
        }
    };
    let deviation = |n: f64| -> Result<f64> {
        match &hyp {
            Some(h) => h.rho(n, &mu),
            None => region.rho(n, &mu),
        }
    };

    let mut sum = Compensated::default();
    sum.add(n_tau as f64);
    let mut points = p.schedule.iter_from_zero().skip(tau as usize).peekable();
    let mut quiet = 0;
    let mut terms = 0u64;
    let mut last = f64::NAN;
    while let Some(n) = points.next() {
        let Some(&next) = points.peek() else {
            // a finite schedule leaves N infinite with whatever probability remains
            let dev = match deviation(n as f64) {
                Ok(x) => x,
                Err(e) => return r.fail("deviation", &e),
            };
            if prob(n as f64, dev) > 0.0 {
                r.note("schedule ends while the tail probability is positive");
                r.value = Some(f64::INFINITY);
                return r;
            }
            break;
        };
        let dev = match deviation(n as f64) {
            Ok(x) => x,
            Err(e) => return r.fail("deviation", &e),
        };
        let term = (next - n) as f64 * prob(n as f64, dev);
        sum.add(term);
        terms += 1;
        last = term;
        quiet = if term < p.options.series_floor { quiet + 1 } else { 0 };
        if quiet >= QUIET_TERMS {
            break;
        }
        if terms >= p.options.series_cap {
            let e = Error::CapExceeded(format!("series still at {term:e} after {terms} terms"));
            r.assume("convergent", AssumptionStatus::Fail, e.to_string());
            return r;
        }
    }
    r.diag("series_terms", terms as f64);
    r.diag("last_term", last);
    r.value = Some(sum.value());
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::BoundOptions;
    use crate::geometry::{Boundary, RegionKind};
    use crate::moments::DistributionSpec;
    use crate::schedules::Schedule;

    #[test]
    fn hoeffding_edge_cases() {
        assert_eq!(hoeffding_tail(10.0, 0.0, 1.0, false), 1.0);
        assert_eq!(hoeffding_tail(10.0, 0.1, 0.0, true), 0.0);
        assert_eq!(hoeffding_tail(1.0, 0.01, 1.0, true), 1.0);
        assert!((hoeffding_tail(4.0, 0.5, 1.0, false) - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn chernoff_is_tighter_than_hoeffding_for_bernoulli() {
        let fam = ScalarFamily::BernoulliAffine { x0: 0.0, x1: 1.0, p: 0.25 };
        for n in [5.0, 20.0, 100.0] {
            for dev in [0.05, 0.2, 0.5] {
                let c = chernoff_tail(&fam, n, dev, true);
                assert!(c <= hoeffding_tail(n, dev, 1.0, false) * (1.0 + 1e-9), "n={n} dev={dev}");
            }
        }
        // the rate at p + dev is the Bernoulli relative entropy
        let (q, p) = (0.45f64, 0.25f64);
        let kl = q * (q / p).ln() + (1.0 - q) * ((1.0 - q) / (1.0 - p)).ln();
        assert!((chernoff_tail(&fam, 1.0, 0.2, true) - (-kl).exp()).abs() < 1e-9);
        assert_eq!(chernoff_tail(&ScalarFamily::PointMass { value: 1.0 }, 1.0, 0.1, false), 0.0);
    }

    #[test]
    fn numeric_slice_matches_closed_form() {
        let region =
            Region::scalar(Boundary::Affine { slope: 0.5, intercept: -1.0 }, Side::Above, RegionKind::Continuity)
                .unwrap();
        for n in [2.0, 5.0, 40.0] {
            let (inf, sup) = slice_bounds(&region, n).unwrap();
            let (ninf, nsup) = slice_bounds(&region.clone().without_hooks(), n).unwrap();
            assert_eq!(sup, f64::INFINITY);
            assert_eq!(nsup, f64::INFINITY);
            assert!((inf - ninf).abs() < 1e-12, "{inf} vs {ninf}");
        }
    }

    #[test]
    fn deterministic_walk_stops_at_n_tau() {
        let region = Region::scalar(Boundary::Constant { c: 4.5 }, Side::Below, RegionKind::Continuity).unwrap();
        let spec = DistributionSpec::Scalar(ScalarFamily::PointMass { value: 1.0 });
        let p = Problem::new(spec, region, Schedule::all_naturals()).unwrap();
        let r = concentration_bound(&p, false);
        assert_eq!(r.value, Some(5.0), "{r:?}");
        let p = p.with_options(BoundOptions { tail: TailKind::Chernoff, ..BoundOptions::default() });
        assert_eq!(concentration_bound(&p, false).value, Some(5.0));
    }
}
