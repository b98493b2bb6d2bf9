//! Bound calculators. Each returns a [`BoundReport`] carrying the value, its
//! direction, and the checklist of hypotheses it relied on.
//!
//! A calculator never returns a number it cannot vouch for: when a proviso
//! fails the report is marked inapplicable, and when the value itself cannot
//! be formed it is left empty.

mod brownian;
mod concentration;
mod convex;
mod hyperplane;
mod lorden;
pub mod sums;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{audit_convexity, supporting_hyperplane_at, Hyperplane, Region, RegionKind, Shape, TIGHT_TOL};
use crate::gfun::GFun;
use crate::moments::{DistributionSpec, MomentProfile, ScalarFamily};
use crate::schedules::{GrowthStatus, Schedule};

pub use concentration::{chernoff_tail, hoeffding_tail, ConcentrationVariant, TailKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TheoremTag {
    T8Lower,
    T10Upper,
    T11UpperBounded,
    T12SampleMean,
    T13SampleMeanNaturals,
    Try88Bounded,
    T14Hyperplane,
    T15HyperplaneBounded,
    T16ChenLordenI,
    T16ChenLordenII,
    T16ChenLordenIII,
    T17Gradient,
    VipFormula,
    T18Concentration,
    T19ConcentrationHyperplane,
    UseWaldLower,
    Brown1,
    Brown2Lower,
    Brown2Upper,
    Brown3,
    Brown4,
    LordenT6,
    LordenT7,
}

impl TheoremTag {
    pub const ALL: [TheoremTag; 23] = [
        Self::T8Lower,
        Self::T10Upper,
        Self::T11UpperBounded,
        Self::T12SampleMean,
        Self::T13SampleMeanNaturals,
        Self::Try88Bounded,
        Self::T14Hyperplane,
        Self::T15HyperplaneBounded,
        Self::T16ChenLordenI,
        Self::T16ChenLordenII,
        Self::T16ChenLordenIII,
        Self::T17Gradient,
        Self::VipFormula,
        Self::T18Concentration,
        Self::T19ConcentrationHyperplane,
        Self::UseWaldLower,
        Self::Brown1,
        Self::Brown2Lower,
        Self::Brown2Upper,
        Self::Brown3,
        Self::Brown4,
        Self::LordenT6,
        Self::LordenT7,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::T8Lower => "T8-lower",
            Self::T10Upper => "T10-upper",
            Self::T11UpperBounded => "T11-upper-bounded",
            Self::T12SampleMean => "T12-samplemean",
            Self::T13SampleMeanNaturals => "T13-samplemean-naturals",
            Self::Try88Bounded => "T-try88-bounded",
            Self::T14Hyperplane => "T14-hyperplane",
            Self::T15HyperplaneBounded => "T15-hyperplane-bounded",
            Self::T16ChenLordenI => "T16-chenlorden-I",
            Self::T16ChenLordenII => "T16-chenlorden-II",
            Self::T16ChenLordenIII => "T16-chenlorden-III",
            Self::T17Gradient => "T17-gradient",
            Self::VipFormula => "vipformula",
            Self::T18Concentration => "T18-concentration",
            Self::T19ConcentrationHyperplane => "T19-concentration-hyperplane",
            Self::UseWaldLower => "T-UseWald-lower",
            Self::Brown1 => "Brown1",
            Self::Brown2Lower => "Brown2-lower",
            Self::Brown2Upper => "Brown2-upper",
            Self::Brown3 => "Brown3",
            Self::Brown4 => "Brown4",
            Self::LordenT6 => "Lorden-T6",
            Self::LordenT7 => "Lorden-T7",
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            Self::T8Lower | Self::UseWaldLower | Self::Brown2Lower | Self::Brown4 => Direction::Lower,
            _ => Direction::Upper,
        }
    }

    /// Bounds on a Brownian first-exit time rather than a discrete one.
    pub fn is_brownian(self) -> bool {
        matches!(self, Self::Brown1 | Self::Brown2Lower | Self::Brown2Upper | Self::Brown3 | Self::Brown4)
    }

    /// Bounds on the renewal overshoot rather than a stopping time.
    pub fn is_overshoot(self) -> bool {
        matches!(self, Self::LordenT6 | Self::LordenT7)
    }
}

impl fmt::Display for TheoremTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownTag(s.to_string()))
    }
}

impl Serialize for TheoremTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Upper,
    Lower,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Upper => "upper",
            Self::Lower => "lower",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssumptionStatus {
    Pass,
    Fail,
    Unchecked,
    /// Asserted in the configuration.
    Declared,
    /// Checked on simulated paths only.
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assumption {
    pub id: String,
    pub status: AssumptionStatus,
    pub note: String,
}

/// A computed bound with its hypotheses and a numeric trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem: TheoremTag,
    pub direction: Direction,
    /// `Some(+∞)` is a genuine infinite value; `None` means no value was formed.
    pub value: Option<f64>,
    pub assumptions: Vec<Assumption>,
    pub diagnostics: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn new(theorem: TheoremTag) -> Self {
        Self {
            theorem,
            direction: theorem.direction(),
            value: None,
            assumptions: Vec::new(),
            diagnostics: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// A value exists and no assumption failed.
    pub fn applicable(&self) -> bool {
        self.value.is_some_and(|v| !v.is_nan()) && self.assumptions.iter().all(|a| a.status != AssumptionStatus::Fail)
    }

    pub fn assume(&mut self, id: &str, status: AssumptionStatus, note: impl Into<String>) {
        self.assumptions.push(Assumption { id: id.to_string(), status, note: note.into() });
    }

    pub fn check(&mut self, id: &str, ok: bool, note: impl Into<String>) -> bool {
        let status = if ok { AssumptionStatus::Pass } else { AssumptionStatus::Fail };
        self.assume(id, status, note);
        ok
    }

    pub fn diag(&mut self, key: &str, value: f64) {
        self.diagnostics.insert(key.to_string(), value);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Records a failure that prevents the value from being formed.
    fn fail(mut self, id: &str, err: &Error) -> Self {
        self.assume(id, AssumptionStatus::Fail, err.to_string());
        self
    }

    pub fn status_of(&self, id: &str) -> Option<AssumptionStatus> {
        self.assumptions.iter().find(|a| a.id == id).map(|a| a.status)
    }
}

/// Numeric settings shared by the calculators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundOptions {
    /// Relative tolerance of bisection searches.
    pub tol: f64,
    /// Largest `t` probed when maximizing over a slab.
    pub t_cap: f64,
    /// Relative step for the central-difference gradient.
    pub grad_step: f64,
    /// Region members sampled when checking a supporting hyperplane.
    pub support_samples: usize,
    /// Midpoint trials in the convexity audit.
    pub convexity_trials: usize,
    pub tail: TailKind,
    pub concentration: ConcentrationVariant,
    /// Stop summing a series once a term drops below this.
    pub series_floor: f64,
    /// Give up on a series after this many terms.
    pub series_cap: u64,
    /// Number of schedule elements audited for the growth condition.
    pub schedule_audit: usize,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            t_cap: 1e12,
            grad_step: 1e-5,
            support_samples: 200,
            convexity_trials: 2000,
            tail: TailKind::Hoeffding,
            concentration: ConcentrationVariant::Auto,
            series_floor: 1e-12,
            series_cap: 50_000_000,
            schedule_audit: 10_000,
        }
    }
}

/// Everything a calculator may need about one scenario.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: DistributionSpec,
    pub profile: MomentProfile,
    /// The region as configured (continuity or stopping).
    pub region: Region,
    pub schedule: Schedule,
    pub gfun: Option<GFun>,
    /// Threshold law for overshoot bounds.
    pub threshold: Option<ScalarFamily>,
    /// Declared sure containment of `(N_0, S_{N_0})` in the closed continuity region.
    pub initial_containment: Option<bool>,
    pub options: BoundOptions,
}

impl Problem {
    pub fn new(spec: DistributionSpec, region: Region, schedule: Schedule) -> Result<Self> {
        let profile = crate::moments::analytic_moments(&spec)?;
        if region.dim() != spec.dim() {
            return Err(Error::Config(format!(
                "region has dimension {} but the distribution has dimension {}",
                region.dim(),
                spec.dim()
            )));
        }
        Ok(Self {
            spec,
            profile,
            region,
            schedule,
            gfun: None,
            threshold: None,
            initial_containment: None,
            options: BoundOptions::default(),
        })
    }

    pub fn with_gfun(mut self, g: GFun) -> Self {
        self.gfun = Some(g);
        self
    }

    pub fn with_threshold(mut self, law: ScalarFamily) -> Self {
        self.threshold = Some(law);
        self
    }

    pub fn with_options(mut self, options: BoundOptions) -> Self {
        self.options = options;
        self
    }

    pub fn mu(&self) -> &[f64] {
        &self.profile.mean
    }

    /// Closure of the continuity region.
    pub fn continuity(&self) -> Region {
        match self.region.kind() {
            RegionKind::Continuity => self.region.clone(),
            RegionKind::Stopping => self.region.complement(),
        }
    }

    /// The stopping region.
    pub fn stopping(&self) -> Region {
        match self.region.kind() {
            RegionKind::Stopping => self.region.clone(),
            RegionKind::Continuity => self.region.complement(),
        }
    }

    pub fn find_m(&self) -> Result<f64> {
        self.continuity().find_m(self.mu(), TIGHT_TOL)
    }

    pub fn hyperplane(&self) -> Result<Hyperplane> {
        supporting_hyperplane_at(&self.continuity(), self.mu(), self.options.grad_step, self.options.support_samples)
    }
}

/// Appends the growth, convexity, containment, crossing and moment checks;
/// returns `m` when the crossing exists.
fn standard_assumptions(r: &mut BoundReport, p: &Problem) -> Option<f64> {
    growth_assumptions(r, p);
    region_assumption(r, p);
    initial_assumption(r, p);
    let m = crossing_assumption(r, p);
    r.check("VI", p.profile.third_moment_finite(), "third absolute moments finite");
    m
}

fn growth_assumptions(r: &mut BoundReport, p: &Problem) {
    match p.schedule.audit(p.options.schedule_audit) {
        Ok(a) => {
            let note = match a.first_violation {
                None => format!("N(l+1) <= {}·N(l) + {} on {} elements", p.schedule.lambda, p.schedule.k, a.audited),
                Some(l) => format!("violated at l = {l}"),
            };
            r.check("I", a.growth_ok && p.schedule.lambda > 0.0, note);
            match a.increments {
                GrowthStatus::Pass => r.assume("II", AssumptionStatus::Pass, "bounded gaps or geometric growth"),
                GrowthStatus::Fail => r.assume("II", AssumptionStatus::Fail, "neither bounded gaps nor growth"),
                GrowthStatus::PrefixOnly => {
                    r.assume("II", AssumptionStatus::Unchecked, "prefix-only: finite explicit list")
                }
            }
        }
        Err(e) => {
            r.assume("I", AssumptionStatus::Fail, e.to_string());
        }
    }
}

fn region_assumption(r: &mut BoundReport, p: &Problem) -> bool {
    let region = p.continuity();
    if !region.is_convex() {
        return r.check("III", false, "closed continuity region is not convex");
    }
    if !region.contains_origin() {
        return r.check("III", false, "closed continuity region misses the origin");
    }
    let t_max = region.find_m(p.mu(), TIGHT_TOL).map(|m| 4.0 * m).unwrap_or(100.0);
    match audit_convexity(&region, p.mu(), t_max, p.options.convexity_trials, 11) {
        None => r.check("III", true, "convex (randomized midpoint audit) and contains the origin"),
        Some((a, b, rho)) => {
            r.check("III", false, format!("midpoint audit failed between {a:?} and {b:?} at weight {rho}"))
        }
    }
}

fn initial_assumption(r: &mut BoundReport, p: &Problem) {
    match p.initial_containment {
        Some(true) => r.assume("IV", AssumptionStatus::Declared, "declared in configuration"),
        Some(false) => r.assume("IV", AssumptionStatus::Fail, "declared false in configuration"),
        None if p.schedule.n0() == 0 && p.continuity().contains_origin() => {
            r.assume("IV", AssumptionStatus::Pass, "N0 = 0 and the origin is in the region")
        }
        None => r.assume("IV", AssumptionStatus::Unchecked, "not declared; checked on simulated paths"),
    }
}

fn crossing_assumption(r: &mut BoundReport, p: &Problem) -> Option<f64> {
    match p.find_m() {
        Ok(m) => {
            r.check("V", m > 0.0, format!("mean ray crosses the boundary at m = {m}"));
            r.diag("m", m);
            (m > 0.0).then_some(m)
        }
        Err(e) => {
            r.assume("V", AssumptionStatus::Fail, e.to_string());
            None
        }
    }
}

/// `g` of a rule that stops once `t ≥ g(s/t)`; `Problem::gfun` supplies it for custom regions.
pub(crate) fn sample_mean_g(p: &Problem) -> Option<GFun> {
    match p.region.shape() {
        Shape::SampleMean(g) => Some(g.clone()),
        Shape::Custom { .. } => p.gfun.clone(),
        _ => None,
    }
}

/// `g` of a rule that stops once `t·g(s/t) ≥ 1`; `Problem::gfun` supplies it for custom regions.
pub(crate) fn reciprocal_g(p: &Problem) -> Option<GFun> {
    match p.region.shape() {
        Shape::PerspectiveLevel(g) => Some(g.clone()),
        Shape::Custom { .. } => p.gfun.clone(),
        _ => None,
    }
}

/// Computes the requested bound; failures surface as inapplicable reports.
pub fn compute_bound(tag: TheoremTag, p: &Problem) -> BoundReport {
    use TheoremTag::*;
    match tag {
        T8Lower => convex::lower_bound_stopping(p),
        T10Upper => convex::upper_bound_via_m(p, false),
        T11UpperBounded => convex::upper_bound_via_m(p, true),
        T12SampleMean | T13SampleMeanNaturals | Try88Bounded => convex::sample_mean_bound(p, tag),
        UseWaldLower => convex::wald_lower_bound(p),
        T14Hyperplane => hyperplane::hyperplane_bound(p, false),
        T15HyperplaneBounded => hyperplane::hyperplane_bound(p, true),
        T16ChenLordenI | T16ChenLordenII | T16ChenLordenIII => hyperplane::chen_lorden_bound(p, tag),
        T17Gradient => hyperplane::gradient_bound(p),
        VipFormula => hyperplane::vip_formula(p),
        T18Concentration => concentration::concentration_bound(p, false),
        T19ConcentrationHyperplane => concentration::concentration_bound(p, true),
        Brown1 | Brown2Lower | Brown2Upper | Brown3 | Brown4 => brownian::brownian_bound(p, tag),
        LordenT6 => lorden::lorden_t6(p),
        LordenT7 => lorden::lorden_t7(p),
    }
}

pub use convex::{lower_bound_stopping, sample_mean_bound, upper_bound_via_m, wald_lower_bound};
pub use hyperplane::{chen_lorden_bound, gradient_bound, hyperplane_bound, vip_formula};
pub use lorden::{lorden_t6, lorden_t7};
