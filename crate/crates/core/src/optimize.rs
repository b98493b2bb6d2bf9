//! Optimization kernels: largest `t` in a slab-constrained region, maxima of
//! concave functions over boxes, and the vertex form of the linear-fractional
//! maximization over a unit cube.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{dot, Region, Shape, Side};
use crate::rng::aux_stream;

/// One set of slab lines `t·α + ζ ≤ s ≤ t·β + η`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlabLines {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub eta: Vec<f64>,
}

impl SlabLines {
    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// `α ≤ β` and `ζ ≤ η` elementwise.
    pub fn is_ordered(&self) -> bool {
        self.alpha.iter().zip(&self.beta).all(|(a, b)| a <= b) && self.zeta.iter().zip(&self.eta).all(|(z, e)| z <= e)
    }

    fn check(&self) -> Result<()> {
        let d = self.alpha.len();
        if d == 0 || self.beta.len() != d || self.zeta.len() != d || self.eta.len() != d {
            return Err(Error::Domain("slab vectors must share one positive length".into()));
        }
        if self.alpha.iter().chain(&self.beta).chain(&self.zeta).chain(&self.eta).any(|x| !x.is_finite()) {
            return Err(Error::Domain("slab coefficients must be finite".into()));
        }
        Ok(())
    }
}

/// Slab constraints on `s` given `t`, optionally intersected with a second set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Slab {
    pub lines: SlabLines,
    pub primed: Option<SlabLines>,
}

impl Slab {
    pub fn new(lines: SlabLines, primed: Option<SlabLines>) -> Result<Self> {
        lines.check()?;
        if let Some(p) = &primed {
            p.check()?;
            if p.dim() != lines.dim() {
                return Err(Error::Domain("primed slab has a different dimension".into()));
            }
        }
        Ok(Self { lines, primed })
    }

    pub fn dim(&self) -> usize {
        self.lines.dim()
    }

    /// Every line set has `α ≤ β` and `ζ ≤ η`.
    pub fn is_ordered(&self) -> bool {
        self.lines.is_ordered() && self.primed.as_ref().is_none_or(SlabLines::is_ordered)
    }

    /// The box of admissible `s` at time `t`, or `None` if it is empty.
    pub fn box_at(&self, t: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let d = self.dim();
        let mut lo = vec![f64::NEG_INFINITY; d];
        let mut hi = vec![f64::INFINITY; d];
        for l in std::iter::once(&self.lines).chain(self.primed.as_ref()) {
            for k in 0..d {
                lo[k] = lo[k].max(t * l.alpha[k] + l.zeta[k]);
                hi[k] = hi[k].min(t * l.beta[k] + l.eta[k]);
            }
        }
        lo.iter().zip(&hi).all(|(a, b)| a <= b).then_some((lo, hi))
    }
}

/// Outcome of [`max_t_over_slab`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlabMax {
    /// `+∞` when feasible at the cap; `0` when nothing is feasible.
    pub value: f64,
    pub empty: bool,
    pub unbounded: bool,
}

/// Minimum of the region constraint over a box, for the slice at `t`, and whether
/// it came from a closed form.
fn min_constraint_over_box(region: &Region, t: f64, lo: &[f64], hi: &[f64]) -> (f64, bool) {
    if let Some(v) = closed_form_min(region, t, lo, hi) {
        return (v, true);
    }
    let h = |s: &[f64]| region.constraint(t, s);
    let v = if lo.len() == 1 {
        let f = |x: f64| -h(&[x]);
        -golden_max(&f, lo[0], hi[0], 1e-12).1
    } else {
        let neg = |s: &[f64]| -h(s);
        -projected_ascent(&neg, lo, hi, 0x51ab).0
    };
    (v, false)
}

fn closed_form_min(region: &Region, t: f64, lo: &[f64], hi: &[f64]) -> Option<f64> {
    let pick = |coef: f64, k: usize| if coef > 0.0 { lo[k] } else { hi[k] };
    if region.has_hooks() {
        match (region.shape(), region.side()) {
            (Shape::Scalar(b), Side::Below) => return Some(lo[0] - b.value(t)),
            (Shape::Scalar(b), Side::Above) => return Some(b.value(t) - hi[0]),
            (Shape::Halfspace { a, b, c }, side) => {
                let sign = if side == Side::Below { 1.0 } else { -1.0 };
                let s: Vec<f64> = (0..a.len()).map(|k| pick(sign * a[k], k)).collect();
                return Some(sign * (dot(a, &s) + b * t - c));
            }
            (Shape::NormPower { c, gamma, .. }, Side::Below) => {
                let s: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.0f64.clamp(*l, *h)).collect();
                return Some(s.iter().map(|x| x * x).sum::<f64>().sqrt() - c * t.powf(*gamma));
            }
            _ => {}
        }
    }
    None
}

fn feasible_at(region: &Region, slab: &Slab, t: f64) -> bool {
    match slab.box_at(t) {
        Some((lo, hi)) => {
            // numeric minima carry their own error, closed forms are taken at face value
            let (v, exact) = min_constraint_over_box(region, t, &lo, &hi);
            v <= if exact { 0.0 } else { 1e-12 * (1.0 + t.abs()) }
        }
        None => false,
    }
}

/// Largest `t` such that some `s` in the slab at `t` has `(t, s)` in the region.
pub fn max_t_over_slab(region: &Region, slab: &Slab, t_cap: f64, tol: f64) -> Result<SlabMax> {
    if slab.dim() != region.dim() {
        return Err(Error::Domain("slab and region dimensions differ".into()));
    }
    if !(t_cap > 0.0) {
        return Err(Error::Domain(format!("t_cap must be positive, got {t_cap}")));
    }
    if feasible_at(region, slab, t_cap) {
        return Ok(SlabMax { value: f64::INFINITY, empty: false, unbounded: true });
    }
    let mut grid = vec![0.0];
    let mut k = -40;
    loop {
        let t = 2f64.powi(k);
        if t >= t_cap {
            break;
        }
        grid.push(t);
        k += 1;
    }
    grid.push(t_cap);
    let Some(last) = grid.iter().rposition(|&t| feasible_at(region, slab, t)) else {
        return Ok(SlabMax { value: 0.0, empty: true, unbounded: false });
    };
    let (mut inside, mut out) = (grid[last], grid[last + 1]);
    while out - inside > tol * inside.max(1.0) {
        let mid = 0.5 * (inside + out);
        if mid == inside || mid == out {
            break;
        }
        if feasible_at(region, slab, mid) {
            inside = mid;
        } else {
            out = mid;
        }
    }
    Ok(SlabMax { value: inside, empty: false, unbounded: false })
}

/// Golden-section search for the maximum of a unimodal `f` on `[a, b]`,
/// returning `(argmax, max)` and also checking both endpoints.
pub fn golden_max(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let finite_or_neg = |x: f64| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut best = (a, finite_or_neg(a));
    let fb = finite_or_neg(b);
    if fb > best.1 {
        best = (b, fb);
    }
    if b <= a {
        return best;
    }
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = finite_or_neg(x1);
    let mut f2 = finite_or_neg(x2);
    for _ in 0..300 {
        if hi - lo <= tol * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = finite_or_neg(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = finite_or_neg(x1);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Multi-start projected gradient ascent of `f` over the box; returns `(max, argmax)`.
fn projected_ascent(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], seed: u64) -> (f64, Vec<f64>) {
    let d = lo.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let mut starts: Vec<Vec<f64>> = vec![lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect()];
    let corners = 1usize << d.min(6);
    for idx in 0..corners {
        starts.push((0..d).map(|k| if k < 6 && (idx >> k) & 1 == 1 { hi[k] } else { lo[k] }).collect());
    }
    let mut rng = aux_stream(seed, d as u64);
    for _ in 0..8 {
        starts.push((0..d).map(|k| lo[k] + (hi[k] - lo[k]) * rng.random::<f64>()).collect());
    }
    let project = |x: &mut [f64]| {
        for k in 0..d {
            x[k] = x[k].clamp(lo[k], hi[k]);
        }
    };
    let width = lo.iter().zip(hi).map(|(a, b)| b - a).fold(0.0f64, f64::max).max(1e-12);
    let mut best = (f64::NEG_INFINITY, starts[0].clone());
    for mut x in starts {
        let mut fx = eval(&x);
        let mut step = width;
        for _ in 0..500 {
            if step < 1e-13 * width {
                break;
            }
            let mut grad = vec![0.0; d];
            let hstep = 1e-7 * width;
            for k in 0..d {
                let mut up = x.clone();
                up[k] = (up[k] + hstep).min(hi[k]);
                let mut down = x.clone();
                down[k] = (down[k] - hstep).max(lo[k]);
                let span = up[k] - down[k];
                grad[k] = if span > 0.0 { (eval(&up) - eval(&down)) / span } else { 0.0 };
                if !grad[k].is_finite() {
                    grad[k] = 0.0;
                }
            }
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if gnorm == 0.0 {
                break;
            }
            let mut moved = false;
            while step >= 1e-13 * width {
                let mut cand: Vec<f64> = x.iter().zip(&grad).map(|(xi, g)| xi + step * g / gnorm).collect();
                project(&mut cand);
                let fc = eval(&cand);
                if fc > fx {
                    x = cand;
                    fx = fc;
                    moved = true;
                    step *= 1.5;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if fx > best.0 {
            best = (fx, x);
        }
    }
    best
}

/// Outcome of [`max_concave_over_box`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxMax {
    pub value: f64,
    pub argmax: Vec<f64>,
}

/// Maximum of a concave `f` over `[lo, hi]`; `+∞` if `f` is `+∞` at any probe.
pub fn max_concave_over_box(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], tol: f64) -> Result<BoxMax> {
    if lo.len() != hi.len() || lo.is_empty() {
        return Err(Error::Domain("box bounds must share one positive length".into()));
    }
    if lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
        return Err(Error::Domain(format!("box lower corner {lo:?} exceeds upper corner {hi:?}")));
    }
    let d = lo.len();
    let center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut probes = vec![center.clone()];
    for idx in 0..(1usize << d.min(10)) {
        probes.push((0..d).map(|k| if k < 10 && (idx >> k) & 1 == 1 { hi[k] } else { lo[k] }).collect());
    }
    let mut best = BoxMax { value: f64::NEG_INFINITY, argmax: center.clone() };
    for p in &probes {
        let v = f(p);
        if v == f64::INFINITY {
            return Ok(BoxMax { value: f64::INFINITY, argmax: p.clone() });
        }
        if v > best.value {
            best = BoxMax { value: v, argmax: p.clone() };
        }
    }
    let (value, argmax) = if d == 1 {
        let g = |x: f64| f(&[x]);
        let (x, v) = golden_max(&g, lo[0], hi[0], tol);
        (v, vec![x])
    } else {
        projected_ascent(f, lo, hi, 0xb0c5)
    };
    if value == f64::INFINITY {
        return Ok(BoxMax { value, argmax });
    }
    if value > best.value {
        best = BoxMax { value, argmax };
    }
    if !best.value.is_finite() {
        return Err(Error::Degenerate("function is not finite anywhere on the box".into()));
    }
    Ok(best)
}

/// Outcome of [`vertex_fraction_max`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexMax {
    pub value: f64,
    /// Lexicographically smallest maximizing vertex.
    pub vertex: Vec<u8>,
    /// Smallest denominator over all vertices (positive).
    pub min_denominator: f64,
}

/// `max_q (C - A[η + q(ζ-η)]) / (B + A[β + q(α-β)])` over `q ∈ {0,1}^d`,
/// with products taken elementwise inside the inner product with `A`.
pub fn vertex_fraction_max(a: &[f64], b: f64, c: f64, lines: &SlabLines) -> Result<VertexMax> {
    lines.check()?;
    let d = lines.dim();
    if a.len() != d {
        return Err(Error::Domain("hyperplane and slab dimensions differ".into()));
    }
    if d > 20 {
        return Err(Error::Domain(format!("{d} dimensions exceed the 20-dimensional vertex limit")));
    }
    let vertex = |idx: usize| -> Vec<u8> { (0..d).map(|k| ((idx >> (d - 1 - k)) & 1) as u8).collect() };
    let terms = |q: &[u8]| {
        let mut num = c;
        let mut den = b;
        for k in 0..d {
            let (qa, qz) = if q[k] == 1 { (lines.alpha[k], lines.zeta[k]) } else { (lines.beta[k], lines.eta[k]) };
            num -= a[k] * qz;
            den += a[k] * qa;
        }
        (num, den)
    };
    let count = 1usize << d;
    let mut min_den = f64::INFINITY;
    for idx in 0..count {
        min_den = min_den.min(terms(&vertex(idx)).1);
    }
    if !(min_den > 0.0) {
        return Err(Error::ProvisoViolated(format!("vertex denominator minimum {min_den} is not positive")));
    }
    let mut best = VertexMax { value: f64::NEG_INFINITY, vertex: vertex(0), min_denominator: min_den };
    for idx in 0..count {
        let q = vertex(idx);
        let (num, den) = terms(&q);
        let v = num / den;
        if v > best.value {
            best.value = v;
            best.vertex = q;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Boundary, RegionKind};

    fn lines(alpha: f64, beta: f64, zeta: f64, eta: f64) -> SlabLines {
        SlabLines { alpha: vec![alpha], beta: vec![beta], zeta: vec![zeta], eta: vec![eta] }
    }

    fn le(b: Boundary) -> Region {
        Region::scalar(b, Side::Below, RegionKind::Continuity).unwrap()
    }

    /// Dense `(t, s)` grid oracle for the slab maximum in one dimension.
    fn grid_oracle(region: &Region, slab: &Slab, t_hi: f64) -> f64 {
        let mut best = 0.0;
        for i in 0..=4000 {
            let t = t_hi * i as f64 / 4000.0;
            if let Some((lo, hi)) = slab.box_at(t) {
                for j in 0..=400 {
                    let s = lo[0] + (hi[0] - lo[0]) * j as f64 / 400.0;
                    if region.contains(t, &[s]) {
                        best = t;
                        break;
                    }
                }
            }
        }
        best
    }

    #[test]
    fn slab_examples() {
        let c5 = le(Boundary::Constant { c: 5.0 });
        let ray = Slab::new(lines(1.0, 1.0, 0.0, 0.0), None).unwrap();
        assert!((max_t_over_slab(&c5, &ray, 1e12, 1e-12).unwrap().value - 5.0).abs() < 1e-9);
        let sqrt = le(Boundary::Power { c: 2.0, gamma: 0.5 });
        assert!((max_t_over_slab(&sqrt, &ray, 1e12, 1e-12).unwrap().value - 4.0).abs() < 1e-9);
        let wide = Slab::new(lines(0.9, 1.1, -0.5, 0.5), None).unwrap();
        let v = max_t_over_slab(&c5, &wide, 1e12, 1e-12).unwrap().value;
        assert!((v - 55.0 / 9.0).abs() < 1e-9);
        let oracle = grid_oracle(&c5, &wide, 8.0);
        assert!((v - oracle).abs() <= 8.0 / 4000.0 + 1e-12, "{v} vs {oracle}");
        // the same answer through the generic minimization route
        let v2 = max_t_over_slab(&c5.clone().without_hooks(), &wide, 1e12, 1e-12).unwrap().value;
        assert!((v2 - 55.0 / 9.0).abs() < 1e-8);
    }

    #[test]
    fn slab_flags_unbounded_and_empty() {
        let open = le(Boundary::Affine { slope: 2.0, intercept: 1.0 });
        let ray = Slab::new(lines(1.0, 1.0, 0.0, 0.0), None).unwrap();
        let r = max_t_over_slab(&open, &ray, 1e9, 1e-12).unwrap();
        assert!(r.unbounded && r.value == f64::INFINITY);
        let far = Slab::new(lines(1.0, 1.0, 10.0, 10.0), None).unwrap();
        let r = max_t_over_slab(&le(Boundary::Constant { c: 5.0 }), &far, 1e9, 1e-12).unwrap();
        assert!(r.empty && r.value == 0.0);
    }

    #[test]
    fn feasible_interval_property() {
        let regions = [
            le(Boundary::Constant { c: 5.0 }),
            le(Boundary::Power { c: 2.0, gamma: 0.5 }),
            le(Boundary::Affine { slope: 0.25, intercept: 3.0 }),
            Region::halfspace(vec![1.0, 1.0], 0.0, 6.0, RegionKind::Continuity).unwrap(),
            Region::norm_power(2.0, 0.5, 2, Side::Below, RegionKind::Continuity).unwrap(),
        ];
        for r in regions {
            let d = r.dim();
            let slab = Slab::new(
                SlabLines { alpha: vec![0.4; d], beta: vec![0.6; d], zeta: vec![-0.25; d], eta: vec![0.25; d] },
                None,
            )
            .unwrap();
            for route in [r.clone(), r.clone().without_hooks()] {
                let t = max_t_over_slab(&route, &slab, 1e12, 1e-12).unwrap().value;
                assert!(t.is_finite() && t > 0.0);
                assert!(feasible_at(&route, &slab, 0.99 * t), "{}", route.label());
                assert!(!feasible_at(&route, &slab, 1.01 * t), "{}", route.label());
            }
        }
    }

    #[test]
    fn concave_box_examples() {
        let recip = |x: &[f64]| 5.0 / x[0];
        let r = max_concave_over_box(&recip, &[0.4], &[0.6], 1e-12).unwrap();
        assert!((r.value - 12.5).abs() < 1e-9);
        let sq = |x: &[f64]| (2.0 / x[0]).powi(2);
        let r = max_concave_over_box(&sq, &[0.9], &[1.1], 1e-12).unwrap();
        assert!((r.value - (2.0f64 / 0.9).powi(2)).abs() < 1e-9);
        let seven = |_: &[f64]| 7.0;
        assert_eq!(max_concave_over_box(&seven, &[0.0, -1.0], &[1.0, 2.0], 1e-12).unwrap().value, 7.0);
        let cap = |x: &[f64]| 20.0 + 100.0 * x[0] * (1.0 - x[0]);
        let r = max_concave_over_box(&cap, &[0.2], &[0.7], 1e-12).unwrap();
        assert!((r.value - 45.0).abs() < 1e-9);
        let bowl = |x: &[f64]| -((x[0] - 0.3).powi(2) + (x[1] + 0.2).powi(2));
        let r = max_concave_over_box(&bowl, &[0.0, 0.0], &[1.0, 1.0], 1e-12).unwrap();
        assert!((r.value + 0.04).abs() < 1e-9, "{r:?}");
        let inf = |x: &[f64]| if x[0] <= 0.0 { f64::INFINITY } else { 1.0 / x[0] };
        assert_eq!(max_concave_over_box(&inf, &[0.0], &[1.0], 1e-12).unwrap().value, f64::INFINITY);
        let nan = |_: &[f64]| f64::NAN;
        assert!(matches!(max_concave_over_box(&nan, &[0.0], &[1.0], 1e-12), Err(Error::Degenerate(_))));
    }

    #[test]
    fn vertex_examples() {
        // point mass at μ = 1: every vertex gives C / (B + A·μ) = m
        let degenerate = lines(1.0, 1.0, 0.0, 0.0);
        let r = vertex_fraction_max(&[2.0], -1.0, 4.0, &degenerate).unwrap();
        assert_eq!(r.value, 4.0);
        let two = lines(0.9, 1.1, -0.5, 0.5);
        let r = vertex_fraction_max(&[1.0], 0.0, 5.0, &two).unwrap();
        assert!((r.value - 55.0 / 9.0).abs() < 1e-12);
        assert_eq!(r.vertex, vec![1]);
        let bad = lines(-1.0, 1.0, 0.0, 0.0);
        assert!(matches!(vertex_fraction_max(&[1.0], 0.0, 5.0, &bad), Err(Error::ProvisoViolated(_))));
    }

    #[test]
    fn vertex_ties_pick_smallest() {
        let flat = SlabLines { alpha: vec![1.0, 1.0], beta: vec![1.0, 1.0], zeta: vec![0.0; 2], eta: vec![0.0; 2] };
        let r = vertex_fraction_max(&[1.0, 1.0], 0.0, 6.0, &flat).unwrap();
        assert_eq!(r.vertex, vec![0, 0]);
        assert_eq!(r.value, 3.0);
    }
}
