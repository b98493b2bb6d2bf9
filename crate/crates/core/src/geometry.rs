//! Regions in `(t, s)` space and the geometric quantities derived from them.
//!
//! A region is the closed set `{φ(t, s) ≤ 0}` or `{φ(t, s) ≥ 0}` for a level
//! function `φ`. Built-in shapes carry closed forms for the mean-ray interval,
//! the log-gradient of `g`, and slice distances; custom shapes (and built-ins
//! with their hooks disabled) fall back to bisection on the membership test.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfun::GFun;
use crate::rng::aux_stream;

/// Upper end of the ray search, `2^60`.
pub const RAY_CAP: f64 = 1_152_921_504_606_846_976.0;
const RAY_FLOOR_EXP: i32 = -30;
const RAY_CAP_EXP: i32 = 60;
/// Relative bisection tolerance used internally when no tolerance is supplied.
pub const TIGHT_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    Continuity,
    Stopping,
}

/// Which side of the level function forms the region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// `{φ ≤ 0}`; for scalar boundaries, `{s ≤ f(t)}`.
    Below,
    /// `{φ ≥ 0}`; for scalar boundaries, `{s ≥ f(t)}`.
    Above,
}

impl Side {
    fn flip(self) -> Self {
        match self {
            Side::Below => Side::Above,
            Side::Above => Side::Below,
        }
    }
}

/// Scalar boundary curves `f(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Boundary {
    Constant {
        c: f64,
    },
    /// `slope·t + intercept`
    Affine {
        slope: f64,
        intercept: f64,
    },
    /// `c·t^γ` with `c > 0`, `0 < γ < 1`
    Power {
        c: f64,
        gamma: f64,
    },
}

impl Boundary {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { c } => c,
            Self::Affine { slope, intercept } => slope * t + intercept,
            Self::Power { c, gamma } => c * t.max(0.0).powf(gamma),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Affine { slope, .. } => slope,
            Self::Power { c, gamma } => c * gamma * t.powf(gamma - 1.0),
        }
    }

    fn is_concave(&self) -> bool {
        true
    }

    fn is_convex(&self) -> bool {
        !matches!(self, Self::Power { .. })
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Power { c, gamma } if !(c > 0.0 && gamma > 0.0 && gamma < 1.0) => {
                Err(Error::ParameterDomain(format!("power boundary needs c > 0 and 0 < γ < 1, got {c}, {gamma}")))
            }
            Self::Constant { c } if !c.is_finite() => Err(Error::ParameterDomain("constant boundary".into())),
            Self::Affine { slope, intercept } if !(slope.is_finite() && intercept.is_finite()) => {
                Err(Error::ParameterDomain("affine boundary".into()))
            }
            _ => Ok(()),
        }
    }

    fn label(&self) -> String {
        match *self {
            Self::Constant { c } => format!("{c}"),
            Self::Affine { slope, intercept } => format!("{slope}t+{intercept}"),
            Self::Power { c, gamma } => format!("{c}t^{gamma}"),
        }
    }
}

/// Level function of a custom region.
pub type LevelFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Shape {
    /// `φ = s - f(t)`
    Scalar(Boundary),
    /// `φ = a·s + b·t - c`
    Halfspace {
        a: Vec<f64>,
        b: f64,
        c: f64,
    },
    /// `φ = ||s||₂ - c·t^γ`, `0 ≤ γ < 1`
    NormPower {
        c: f64,
        gamma: f64,
        dim: usize,
    },
    /// `φ = t² - t·g(s/t)`: below is `{t ≤ g(s/t)}`, above is `{t ≥ g(s/t)}`.
    SampleMean(GFun),
    /// `φ = t·g(s/t) - 1`: above is `{t·g(s/t) ≥ 1}`.
    PerspectiveLevel(GFun),
    Custom {
        level: LevelFn,
        dim: usize,
        convex_below: bool,
        convex_above: bool,
    },
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Scalar(b) => f.debug_tuple("Scalar").field(b).finish(),
            Self::Halfspace { a, b, c } => {
                f.debug_struct("Halfspace").field("a", a).field("b", b).field("c", c).finish()
            }
            Self::NormPower { c, gamma, dim } => {
                f.debug_struct("NormPower").field("c", c).field("gamma", gamma).field("dim", dim).finish()
            }
            Self::SampleMean(g) => f.debug_tuple("SampleMean").field(g).finish(),
            Self::PerspectiveLevel(g) => f.debug_tuple("PerspectiveLevel").field(g).finish(),
            Self::Custom { dim, .. } => f.debug_struct("Custom").field("dim", dim).finish_non_exhaustive(),
        }
    }
}

/// A closed continuity or stopping region.
#[derive(Debug, Clone)]
pub struct Region {
    shape: Shape,
    side: Side,
    kind: RegionKind,
    convex: bool,
    hooks: bool,
    label: String,
}

/// `{t ≥ 0 : (t, t·v) ∈ R̄}` as `[lo, hi]`; `hi` may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayInterval {
    pub lo: f64,
    pub hi: f64,
}

impl Region {
    fn build(shape: Shape, side: Side, kind: RegionKind, label: String) -> Self {
        let convex = default_convexity(&shape, side);
        Self { shape, side, kind, convex, hooks: true, label }
    }

    /// `{s ≤ f(t)}` (`Side::Below`) or `{s ≥ f(t)}` (`Side::Above`).
    pub fn scalar(boundary: Boundary, side: Side, kind: RegionKind) -> Result<Self> {
        boundary.validate()?;
        let op = if side == Side::Below { "<=" } else { ">=" };
        Ok(Self::build(Shape::Scalar(boundary), side, kind, format!("s{op}{}", boundary.label())))
    }

    /// `{a·s + b·t ≤ c}`.
    pub fn halfspace(a: Vec<f64>, b: f64, c: f64, kind: RegionKind) -> Result<Self> {
        if a.is_empty() || a.iter().chain([&b, &c]).any(|x| !x.is_finite()) {
            return Err(Error::ParameterDomain("halfspace coefficients".into()));
        }
        let label = format!("{a:?}.s+{b}t<={c}");
        Ok(Self::build(Shape::Halfspace { a, b, c }, Side::Below, kind, label))
    }

    /// `{||s||₂ ≤ c·t^γ}` or its complement side.
    pub fn norm_power(c: f64, gamma: f64, dim: usize, side: Side, kind: RegionKind) -> Result<Self> {
        if !(c > 0.0 && (0.0..1.0).contains(&gamma) && dim > 0) {
            return Err(Error::ParameterDomain(format!("norm-power c={c}, γ={gamma}, dim={dim}")));
        }
        let op = if side == Side::Below { "<=" } else { ">=" };
        Ok(Self::build(Shape::NormPower { c, gamma, dim }, side, kind, format!("|s|{op}{c}t^{gamma}")))
    }

    /// Continue while `t < g(s/t)` (continuity) or stop once `t ≥ g(s/t)` (stopping).
    pub fn sample_mean(g: GFun, kind: RegionKind) -> Self {
        let side = match kind {
            RegionKind::Continuity => Side::Below,
            RegionKind::Stopping => Side::Above,
        };
        let label = format!("t vs {}", g.label());
        Self::build(Shape::SampleMean(g), side, kind, label)
    }

    /// Stop once `t·g(s/t) ≥ 1`.
    pub fn reciprocal_rule(g: GFun) -> Self {
        let label = format!("t*{}>=1", g.label());
        Self::build(Shape::PerspectiveLevel(g), Side::Above, RegionKind::Stopping, label)
    }

    /// A region given only by its level function.
    pub fn custom(
        dim: usize,
        level: LevelFn,
        side: Side,
        kind: RegionKind,
        convex: bool,
        label: impl Into<String>,
    ) -> Self {
        let (convex_below, convex_above) = match side {
            Side::Below => (convex, false),
            Side::Above => (false, convex),
        };
        Self {
            shape: Shape::Custom { level, dim, convex_below, convex_above },
            side,
            kind,
            convex,
            hooks: false,
            label: label.into(),
        }
    }

    /// Overrides the convexity assertion.
    pub fn with_convex_flag(mut self, convex: bool) -> Self {
        self.convex = convex;
        self
    }

    /// Disables closed forms so every query goes through membership bisection.
    pub fn without_hooks(mut self) -> Self {
        self.hooks = false;
        self
    }

    /// Closure of the complement, with the kind swapped.
    pub fn complement(&self) -> Self {
        let side = self.side.flip();
        let kind = match self.kind {
            RegionKind::Continuity => RegionKind::Stopping,
            RegionKind::Stopping => RegionKind::Continuity,
        };
        let mut out = Self::build(self.shape.clone(), side, kind, format!("not({})", self.label));
        out.hooks = self.hooks && !matches!(self.shape, Shape::Custom { .. });
        out
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn has_hooks(&self) -> bool {
        self.hooks
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Scalar(_) | Shape::SampleMean(_) | Shape::PerspectiveLevel(_) => 1,
            Shape::Halfspace { a, .. } => a.len(),
            Shape::NormPower { dim, .. } | Shape::Custom { dim, .. } => *dim,
        }
    }

    /// `f` and orientation for scalar-boundary regions.
    pub fn scalar_boundary(&self) -> Option<(Boundary, Side)> {
        match self.shape {
            Shape::Scalar(b) => Some((b, self.side)),
            _ => None,
        }
    }

    /// The level function `φ(t, s)`.
    pub fn level(&self, t: f64, s: &[f64]) -> f64 {
        match &self.shape {
            Shape::Scalar(b) => s[0] - b.value(t),
            Shape::Halfspace { a, b, c } => dot(a, s) + b * t - c,
            Shape::NormPower { c, gamma, .. } => norm(s) - c * t.max(0.0).powf(*gamma),
            Shape::SampleMean(g) => {
                if t <= 0.0 {
                    0.0
                } else {
                    t * (t - g.value(s[0] / t))
                }
            }
            Shape::PerspectiveLevel(g) => {
                if t <= 0.0 {
                    -1.0
                } else {
                    t * g.value(s[0] / t) - 1.0
                }
            }
            Shape::Custom { level, .. } => level(t, s),
        }
    }

    /// Convex constraint `h` with `R̄ = {h ≤ 0}` (when the region is convex).
    pub fn constraint(&self, t: f64, s: &[f64]) -> f64 {
        match self.side {
            Side::Below => self.level(t, s),
            Side::Above => -self.level(t, s),
        }
    }

    /// Membership in the closed region.
    pub fn contains(&self, t: f64, s: &[f64]) -> bool {
        self.constraint(t, s) <= 0.0
    }

    /// Membership in the interior.
    pub fn contains_strict(&self, t: f64, s: &[f64]) -> bool {
        self.constraint(t, s) < 0.0
    }

    pub fn contains_origin(&self) -> bool {
        self.contains(0.0, &vec![0.0; self.dim()])
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.dim() {
            Ok(())
        } else {
            Err(Error::Domain(format!("vector of length {} for a region of dimension {}", v.len(), self.dim())))
        }
    }

    /// `{t ≥ 0 : (t, t·v) ∈ R̄}`, or `None` when the ray misses the region.
    pub fn ray_interval(&self, v: &[f64], tol: f64) -> Result<Option<RayInterval>> {
        self.check_dim(v)?;
        if self.hooks {
            if let Some(iv) = self.ray_interval_closed_form(v) {
                return Ok(iv);
            }
        }
        self.ray_interval_bisect(v, tol)
    }

    fn ray_interval_closed_form(&self, v: &[f64]) -> Option<Option<RayInterval>> {
        // φ(t, t v) = alpha + beta t on the linear shapes
        let linear = |alpha: f64, beta: f64| {
            let (alpha, beta) = match self.side {
                Side::Below => (alpha, beta),
                Side::Above => (-alpha, -beta),
            };
            if beta == 0.0 {
                (alpha <= 0.0).then_some(RayInterval { lo: 0.0, hi: f64::INFINITY })
            } else if beta > 0.0 {
                let r = -alpha / beta;
                (r >= 0.0).then_some(RayInterval { lo: 0.0, hi: r })
            } else {
                Some(RayInterval { lo: (-alpha / beta).max(0.0), hi: f64::INFINITY })
            }
        };
        // t·w vs c·t^γ with w ≥ 0 a slope magnitude
        let power = |w: f64, c: f64, gamma: f64| {
            let cross = if w > 0.0 { (c / w).powf(1.0 / (1.0 - gamma)) } else { f64::INFINITY };
            match self.side {
                Side::Below => Some(RayInterval { lo: 0.0, hi: cross }),
                Side::Above if cross.is_finite() => Some(RayInterval { lo: cross, hi: f64::INFINITY }),
                Side::Above => Some(RayInterval { lo: 0.0, hi: 0.0 }),
            }
        };
        Some(match &self.shape {
            Shape::Scalar(Boundary::Constant { c }) => linear(-c, v[0]),
            Shape::Scalar(Boundary::Affine { slope, intercept }) => linear(-intercept, v[0] - slope),
            Shape::Scalar(Boundary::Power { c, gamma }) => {
                if v[0] <= 0.0 && self.side == Side::Above {
                    Some(RayInterval { lo: 0.0, hi: 0.0 })
                } else {
                    power(v[0].max(0.0), *c, *gamma)
                }
            }
            Shape::Halfspace { a, b, c } => linear(-c, dot(a, v) + b),
            Shape::NormPower { c, gamma, .. } => power(norm(v), *c, *gamma),
            Shape::SampleMean(g) => {
                let gv = g.value(v[0]);
                match self.side {
                    Side::Below if gv >= 0.0 => Some(RayInterval { lo: 0.0, hi: gv }),
                    Side::Below => Some(RayInterval { lo: 0.0, hi: 0.0 }),
                    Side::Above if gv < f64::INFINITY => Some(RayInterval { lo: gv.max(0.0), hi: f64::INFINITY }),
                    Side::Above => None,
                }
            }
            Shape::PerspectiveLevel(g) => {
                let gv = g.value(v[0]);
                match self.side {
                    Side::Above if gv > 0.0 => Some(RayInterval { lo: 1.0 / gv, hi: f64::INFINITY }),
                    Side::Above => None,
                    Side::Below if gv > 0.0 => Some(RayInterval { lo: 0.0, hi: 1.0 / gv }),
                    Side::Below => Some(RayInterval { lo: 0.0, hi: f64::INFINITY }),
                }
            }
            Shape::Custom { .. } => return None,
        })
    }

    fn ray_interval_bisect(&self, v: &[f64], tol: f64) -> Result<Option<RayInterval>> {
        let on_ray = |t: f64| {
            let s: Vec<f64> = v.iter().map(|x| x * t).collect();
            self.contains(t, &s)
        };
        let mut grid = vec![0.0];
        grid.extend((RAY_FLOOR_EXP..=RAY_CAP_EXP).map(|k| 2f64.powi(k)));
        let inside: Vec<bool> = grid.iter().map(|&t| on_ray(t)).collect();
        let Some(first) = inside.iter().position(|&b| b) else {
            return Ok(None);
        };
        let last = inside.iter().rposition(|&b| b).unwrap_or(first);
        if inside[first..=last].iter().any(|&b| !b) {
            return Err(Error::ConvexityViolation(format!(
                "membership along the ray through {v:?} is not an interval"
            )));
        }
        let lo = if first == 0 { 0.0 } else { bisect(&on_ray, grid[first - 1], grid[first], tol) };
        let hi = if last + 1 == grid.len() { f64::INFINITY } else { bisect(&on_ray, grid[last + 1], grid[last], tol) };
        if hi.is_finite() && hi > 0.0 {
            // spot-check the bracket interior for non-monotone membership
            let lo_probe = lo.max(hi / 1024.0);
            for k in 1..16 {
                let t = lo_probe + (hi - lo_probe) * k as f64 / 16.0;
                if !on_ray(t) {
                    return Err(Error::ConvexityViolation(format!(
                        "ray through {v:?} leaves the region at t={t} before its exit at {hi}"
                    )));
                }
            }
            if on_ray(2.0 * hi) || on_ray(4.0 * hi) {
                return Err(Error::ConvexityViolation(format!("ray through {v:?} re-enters the region after t={hi}")));
            }
        }
        Ok(Some(RayInterval { lo, hi }))
    }

    fn require_convex_with_origin(&self) -> Result<()> {
        if !self.convex {
            return Err(Error::ConvexityViolation(format!("region {} is not convex", self.label)));
        }
        if !self.contains_origin() {
            return Err(Error::Domain(format!("region {} does not contain the origin", self.label)));
        }
        Ok(())
    }

    /// `g(v) = sup{t ≥ 0 : (t, t·v) ∈ R̄}`; `+∞` when the ray never exits.
    pub fn g_of_v(&self, v: &[f64], tol: f64) -> Result<f64> {
        self.require_convex_with_origin()?;
        match self.ray_interval(v, tol)? {
            Some(iv) => Ok(iv.hi),
            None => Err(Error::Domain("origin ray is empty".into())),
        }
    }

    /// The crossing `m` of the mean ray with the boundary.
    pub fn find_m(&self, mu: &[f64], tol: f64) -> Result<f64> {
        let m = self.g_of_v(mu, tol)?;
        if m.is_finite() {
            Ok(m)
        } else {
            Err(Error::NoRayExit { cap: RAY_CAP })
        }
    }

    fn grad_closed_form(&self, mu: &[f64], m: f64) -> Option<Vec<f64>> {
        if !self.hooks {
            return None;
        }
        match &self.shape {
            Shape::Scalar(b) => Some(vec![1.0 / (b.derivative(m) - mu[0])]),
            Shape::Halfspace { a, b, .. } => {
                let den = dot(a, mu) + b;
                Some(a.iter().map(|x| -x / den).collect())
            }
            Shape::NormPower { gamma, .. } if self.side == Side::Below => {
                let n2 = dot(mu, mu);
                Some(mu.iter().map(|x| -x / (n2 * (1.0 - gamma))).collect())
            }
            Shape::SampleMean(g) if self.side == Side::Below => Some(vec![g.derivative(mu[0]) / g.value(mu[0])]),
            _ => None,
        }
    }

    /// `∇ ln g` at `μ` by central differences with step `h·max(1, |μ_k|)`, checked
    /// against the closed form where one exists.
    pub fn grad_log_g(&self, mu: &[f64], h: f64) -> Result<Vec<f64>> {
        self.check_dim(mu)?;
        let m = self.find_m(mu, TIGHT_TOL)?;
        let mut numeric = Vec::with_capacity(mu.len());
        let mut probe = mu.to_vec();
        for k in 0..mu.len() {
            let hk = h * mu[k].abs().max(1.0);
            probe[k] = mu[k] + hk;
            let up = self.g_of_v(&probe, TIGHT_TOL)?;
            probe[k] = mu[k] - hk;
            let down = self.g_of_v(&probe, TIGHT_TOL)?;
            probe[k] = mu[k];
            if !(up.is_finite() && down.is_finite() && up > 0.0 && down > 0.0) {
                return Err(Error::Differentiation(format!(
                    "g is not finite and positive near μ (component {k}: {down}, {up})"
                )));
            }
            numeric.push((up.ln() - down.ln()) / (2.0 * hk));
        }
        match self.grad_closed_form(mu, m) {
            Some(exact) => {
                for (k, (e, n)) in exact.iter().zip(&numeric).enumerate() {
                    if !e.is_finite() || (e - n).abs() > 1e-5 * (1.0 + e.abs()) {
                        return Err(Error::Differentiation(format!(
                            "closed-form gradient {e} disagrees with differences {n} in component {k}"
                        )));
                    }
                }
                Ok(exact)
            }
            None => Ok(numeric),
        }
    }

    /// Points of the closed region scattered around the mean ray up to `t_max`.
    pub fn sample_members<R: Rng + ?Sized>(
        &self,
        mu: &[f64],
        t_max: f64,
        count: usize,
        rng: &mut R,
    ) -> Vec<(f64, Vec<f64>)> {
        let d = self.dim();
        let scale = mu.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
        let mut out = Vec::with_capacity(count);
        let mut s = vec![0.0; d];
        for attempt in 0..count * 200 {
            if out.len() >= count {
                break;
            }
            let t = t_max * rng.random::<f64>();
            let spread = scale * (1.0 + t) * if attempt % 2 == 0 { 0.5 } else { 4.0 };
            for k in 0..d {
                s[k] = t * mu[k] + spread * (2.0 * rng.random::<f64>() - 1.0);
            }
            if let Some((b, _)) = self.scalar_boundary() {
                if attempt % 5 == 0 {
                    s[0] = b.value(t);
                }
            }
            if self.contains(t, &s) {
                out.push((t, s.clone()));
            }
        }
        out
    }

    /// Slice distance `ρ(n)` from `μ` to `{z : (n, n z) ∈ R̄}`.
    pub fn rho(&self, n: f64, mu: &[f64]) -> Result<f64> {
        Ok(self.rho_detail(n, mu)?.distance)
    }

    pub fn rho_detail(&self, n: f64, mu: &[f64]) -> Result<SliceDistance> {
        self.check_dim(mu)?;
        if !(n > 0.0) {
            return Err(Error::Domain(format!("slice time {n} must be positive")));
        }
        if self.hooks {
            if let Some(d) = self.rho_closed_form(n, mu)? {
                return Ok(SliceDistance { distance: d, residual: 0.0, approximate: false });
            }
        }
        let member = |z: &[f64]| {
            let s: Vec<f64> = z.iter().map(|x| x * n).collect();
            self.contains(n, &s)
        };
        if member(mu) {
            return Ok(SliceDistance { distance: 0.0, residual: 0.0, approximate: false });
        }
        if mu.len() == 1 {
            rho_scalar(&member, mu[0], n)
        } else {
            rho_radial(&member, mu, n)
        }
    }

    fn rho_closed_form(&self, n: f64, mu: &[f64]) -> Result<Option<f64>> {
        let gap = |x: f64| x.max(0.0);
        Ok(Some(match (&self.shape, self.side) {
            (Shape::Scalar(b), Side::Below) => gap(mu[0] - b.value(n) / n),
            (Shape::Scalar(b), Side::Above) => gap(b.value(n) / n - mu[0]),
            (Shape::Halfspace { a, b, c }, side) => {
                let na = norm(a);
                let level = dot(a, mu) + b - c / n;
                let level = if side == Side::Below { level } else { -level };
                if na == 0.0 {
                    if level > 0.0 {
                        return Err(Error::EmptySlice { n: n as u64 });
                    }
                    0.0
                } else {
                    gap(level) / na
                }
            }
            (Shape::NormPower { c, gamma, .. }, side) => {
                let r = c * n.powf(gamma - 1.0);
                match side {
                    Side::Below => gap(norm(mu) - r),
                    Side::Above => gap(r - norm(mu)),
                }
            }
            _ => return Ok(None),
        }))
    }
}

fn default_convexity(shape: &Shape, side: Side) -> bool {
    match (shape, side) {
        (Shape::Scalar(b), Side::Below) => b.is_concave(),
        (Shape::Scalar(b), Side::Above) => b.is_convex(),
        (Shape::Halfspace { .. }, _) => true,
        (Shape::NormPower { .. }, Side::Below) => true,
        (Shape::NormPower { .. }, Side::Above) => false,
        (Shape::SampleMean(g), Side::Below) => g.is_concave(),
        (Shape::SampleMean(_), Side::Above) => false,
        (Shape::PerspectiveLevel(g), Side::Above) => g.is_concave(),
        (Shape::PerspectiveLevel(g), Side::Below) => g.is_convex(),
        (Shape::Custom { convex_below, .. }, Side::Below) => *convex_below,
        (Shape::Custom { convex_above, .. }, Side::Above) => *convex_above,
    }
}

/// Result of a slice-distance computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceDistance {
    pub distance: f64,
    /// Final step size of the numeric search; zero for closed forms.
    pub residual: f64,
    pub approximate: bool,
}

/// Bisects between `out` (not a member) and `inside` (a member).
fn bisect(member: &dyn Fn(f64) -> bool, mut out: f64, mut inside: f64, tol: f64) -> f64 {
    for _ in 0..400 {
        if (out - inside).abs() <= tol * inside.abs().max(out.abs()).max(1.0) {
            break;
        }
        let mid = 0.5 * (out + inside);
        if mid == out || mid == inside {
            break;
        }
        if member(mid) {
            inside = mid;
        } else {
            out = mid;
        }
    }
    inside
}

fn rho_scalar(member: &dyn Fn(&[f64]) -> bool, mu: f64, n: f64) -> Result<SliceDistance> {
    let scale = mu.abs().max(1.0);
    let mut best = f64::INFINITY;
    for dir in [1.0, -1.0] {
        for k in -40..=60 {
            let delta = scale * 2f64.powi(k);
            if member(&[mu + dir * delta]) {
                let at = |r: f64| member(&[mu + dir * r]);
                best = best.min(bisect(&at, 0.0, delta, TIGHT_TOL));
                break;
            }
        }
    }
    if best.is_finite() {
        Ok(SliceDistance { distance: best, residual: TIGHT_TOL * best.max(1.0), approximate: false })
    } else {
        Err(Error::EmptySlice { n: n as u64 })
    }
}

/// First-hit radius of the slice along many directions, refined by a
/// shrinking pattern search on the direction.
fn rho_radial(member: &dyn Fn(&[f64]) -> bool, mu: &[f64], n: f64) -> Result<SliceDistance> {
    let d = mu.len();
    let scale = mu.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    let hit = |u: &[f64]| -> f64 {
        let at = |r: f64| {
            let z: Vec<f64> = mu.iter().zip(u).map(|(m, x)| m + r * x).collect();
            member(&z)
        };
        let mut prev = 0.0;
        for k in -30..=60 {
            let r = scale * 2f64.powi(k);
            if at(r) {
                return bisect(&at, prev, r, 1e-12);
            }
            prev = r;
        }
        f64::INFINITY
    };
    let mut rng = aux_stream(n.to_bits(), d as u64);
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for k in 0..d {
        for sgn in [1.0, -1.0] {
            let mut u = vec![0.0; d];
            u[k] = sgn;
            dirs.push(u);
        }
    }
    for _ in 0..64 * d {
        let u: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        dirs.push(normalized(&u));
    }
    let (mut best_u, mut best) = (dirs[0].clone(), f64::INFINITY);
    for u in dirs {
        let r = hit(&u);
        if r < best {
            best = r;
            best_u = u;
        }
    }
    if !best.is_finite() {
        return Err(Error::EmptySlice { n: n as u64 });
    }
    let mut step = 0.5;
    while step > 1e-9 {
        let mut improved = false;
        for k in 0..d {
            for sgn in [1.0, -1.0] {
                let mut u = best_u.clone();
                u[k] += sgn * step;
                let u = normalized(&u);
                let r = hit(&u);
                if r < best {
                    best = r;
                    best_u = u;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(SliceDistance { distance: best, residual: step * best, approximate: true })
}

fn normalized(u: &[f64]) -> Vec<f64> {
    let n = norm(u);
    u.iter().map(|x| x / n).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Supporting hyperplane `A·s + B·t = C` through `(m, mμ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hyperplane {
    pub a: Vec<f64>,
    pub b: f64,
    pub c: f64,
    pub m: f64,
}

impl Hyperplane {
    /// Plane with the given coefficients, anchored where the mean ray meets it.
    pub fn new(a: Vec<f64>, b: f64, c: f64, mu: &[f64]) -> Result<Self> {
        let rate = dot(&a, mu) + b;
        if !(c > 0.0) || !(rate > 0.0) {
            return Err(Error::Domain(format!("hyperplane needs C > 0 and A·μ + B > 0, got C={c}, A·μ+B={rate}")));
        }
        Ok(Self { m: c / rate, a, b, c })
    }

    /// `A·μ + B`.
    pub fn rate(&self, mu: &[f64]) -> f64 {
        dot(&self.a, mu) + self.b
    }

    pub fn a_norm(&self) -> f64 {
        norm(&self.a)
    }

    /// `(1 - m/n)·|A·μ + B| / ||A||₂`, the distance from `μ` to the plane's slice at `n`.
    pub fn rho(&self, n: f64, mu: &[f64]) -> Result<f64> {
        if !(n > self.m) {
            return Err(Error::Domain(format!("slice time {n} must exceed m = {}", self.m)));
        }
        Ok((1.0 - self.m / n) * self.rate(mu).abs() / self.a_norm())
    }
}

/// Hyperplane `A = -∇ ln g(μ)`, `B = 1 - A·μ`, `C = g(μ)`, checked against
/// `support_samples` members of the region.
pub fn supporting_hyperplane_at(region: &Region, mu: &[f64], h: f64, support_samples: usize) -> Result<Hyperplane> {
    let m = region.find_m(mu, TIGHT_TOL)?;
    let grad = region.grad_log_g(mu, h)?;
    let a: Vec<f64> = grad.iter().map(|x| -x).collect();
    let b = 1.0 - dot(&a, mu);
    let hyp = Hyperplane { a, b, c: m, m };
    let mut rng = aux_stream(m.to_bits(), 17);
    let slack = 1e-6 * hyp.c.abs().max(1.0);
    for (t, s) in region.sample_members(mu, 4.0 * m, support_samples, &mut rng) {
        let lhs = dot(&hyp.a, &s) + hyp.b * t;
        if lhs > hyp.c + slack {
            return Err(Error::SupportCheck(format!(
                "member (t={t}, s={s:?}) gives A·s + B·t = {lhs} > C = {}",
                hyp.c
            )));
        }
    }
    Ok(hyp)
}

/// Two members `(t, s)` and a weight `ρ` whose combination leaves the region.
pub type ConvexityWitness = ((f64, Vec<f64>), (f64, Vec<f64>), f64);

/// Randomized midpoint test; returns a witness `(P, Q, ρ)` whose combination leaves the region.
pub fn audit_convexity(region: &Region, mu: &[f64], t_max: f64, trials: usize, seed: u64) -> Option<ConvexityWitness> {
    let mut rng = aux_stream(seed, 29);
    let pts = region.sample_members(mu, t_max, 256.min(trials.max(2)), &mut rng);
    if pts.len() < 2 {
        return None;
    }
    for _ in 0..trials {
        let p = &pts[rng.random_range(0..pts.len())];
        let q = &pts[rng.random_range(0..pts.len())];
        let r: f64 = rng.random();
        let t = r * p.0 + (1.0 - r) * q.0;
        let s: Vec<f64> = p.1.iter().zip(&q.1).map(|(x, y)| r * x + (1.0 - r) * y).collect();
        if region.constraint(t, &s) > 1e-9 * (1.0 + t.abs()) {
            return Some((p.clone(), q.clone(), r));
        }
    }
    None
}
