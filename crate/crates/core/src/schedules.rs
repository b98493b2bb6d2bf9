//! Permitted sample-size sets `N_0 < N_1 < N_2 < ...` and their growth audit.
//!
//! The rule may only stop at `N_1, N_2, ...`; `N_0` is the (non-stopping)
//! starting size. Growth constants `(λ, K)` bound consecutive elements by
//! `N_{ℓ+1} ≤ λ N_ℓ + K`.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// `N_0 = 0`, `N_ℓ = ℓ`.
    AllNaturals,
    /// `N_ℓ = N_0 + ℓ·step`.
    Arithmetic { n0: u64, step: u64 },
    /// `N_ℓ = max(⌈r N_{ℓ-1}⌉, N_{ℓ-1} + 1)`.
    Geometric { n0: u64, ratio: f64 },
    /// `N_1, N_2, ...` listed explicitly; finite.
    Explicit { n0: u64, points: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub lambda: f64,
    pub k: f64,
}

/// Outcome of the bounded-growth check on a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthStatus {
    Pass,
    Fail,
    /// Only a finite prefix exists, so the asymptotic condition is undefined.
    PrefixOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleAudit {
    /// `N_{ℓ+1} ≤ λ N_ℓ + K` on every audited pair.
    pub growth_ok: bool,
    /// First audited `ℓ` with `N_{ℓ+1} > λ N_ℓ + K`.
    pub first_violation: Option<u64>,
    /// Bounded increments or geometric growth.
    pub increments: GrowthStatus,
    pub audited: usize,
}

impl Schedule {
    pub fn all_naturals() -> Self {
        Self { kind: ScheduleKind::AllNaturals, lambda: 1.0, k: 1.0 }
    }

    pub fn arithmetic(n0: u64, step: u64) -> Result<Self> {
        if step == 0 {
            return Err(Error::Schedule("arithmetic step must be positive".into()));
        }
        Ok(Self { kind: ScheduleKind::Arithmetic { n0, step }, lambda: 1.0, k: step as f64 })
    }

    pub fn geometric(n0: u64, ratio: f64) -> Result<Self> {
        if n0 == 0 || !(ratio.is_finite() && ratio > 1.0) {
            return Err(Error::Schedule(format!(
                "geometric schedule needs n0 >= 1 and ratio > 1, got n0={n0}, ratio={ratio}"
            )));
        }
        Ok(Self { kind: ScheduleKind::Geometric { n0, ratio }, lambda: ratio, k: ratio })
    }

    pub fn explicit(n0: u64, points: Vec<u64>, lambda: f64, k: f64) -> Result<Self> {
        let mut prev = n0;
        for (i, &p) in points.iter().enumerate() {
            if p <= prev {
                return Err(Error::Schedule(format!(
                    "explicit schedule not increasing at position {}: {p} after {prev}",
                    i + 1
                )));
            }
            prev = p;
        }
        if points.is_empty() {
            return Err(Error::Schedule("explicit schedule has no sample sizes".into()));
        }
        Ok(Self { kind: ScheduleKind::Explicit { n0, points }, lambda, k })
    }

    /// Replaces the derived `(λ, K)` with user-declared constants.
    pub fn with_growth(mut self, lambda: f64, k: f64) -> Self {
        self.lambda = lambda;
        self.k = k;
        self
    }

    pub fn n0(&self) -> u64 {
        match &self.kind {
            ScheduleKind::AllNaturals => 0,
            ScheduleKind::Arithmetic { n0, .. }
            | ScheduleKind::Geometric { n0, .. }
            | ScheduleKind::Explicit { n0, .. } => *n0,
        }
    }

    pub fn is_all_naturals(&self) -> bool {
        match &self.kind {
            ScheduleKind::AllNaturals => true,
            ScheduleKind::Arithmetic { n0, step } => *n0 == 0 && *step == 1,
            _ => false,
        }
    }

    /// `N_ℓ`, or `None` past the end of a finite list.
    pub fn element(&self, l: u64) -> Option<u64> {
        match &self.kind {
            ScheduleKind::AllNaturals => Some(l),
            ScheduleKind::Arithmetic { n0, step } => n0.checked_add(l.checked_mul(*step)?),
            ScheduleKind::Geometric { .. } => self.iter_from_zero().nth(l as usize),
            ScheduleKind::Explicit { n0, points } => {
                if l == 0 {
                    Some(*n0)
                } else {
                    points.get(l as usize - 1).copied()
                }
            }
        }
    }

    /// `N_0, N_1, N_2, ...`.
    pub fn iter_from_zero(&self) -> ScheduleIter<'_> {
        ScheduleIter { schedule: self, index: 0, prev: None }
    }

    /// Stopping opportunities `N_1, N_2, ...`.
    pub fn iter(&self) -> ScheduleIter<'_> {
        let mut it = self.iter_from_zero();
        it.next();
        it
    }

    /// `sup_ℓ (N_{ℓ+1} - N_ℓ)` when finite.
    pub fn max_gap(&self) -> Option<u64> {
        match &self.kind {
            ScheduleKind::AllNaturals => Some(1),
            ScheduleKind::Arithmetic { step, .. } => Some(*step),
            ScheduleKind::Geometric { .. } => None,
            ScheduleKind::Explicit { n0, points } => {
                let mut prev = *n0;
                let mut gap = 0;
                for &p in points {
                    gap = gap.max(p - prev);
                    prev = p;
                }
                Some(gap)
            }
        }
    }

    /// Checks the growth constants on `N_0..N_horizon` and determines the increment condition.
    pub fn audit(&self, horizon: usize) -> Result<ScheduleAudit> {
        let pts: Vec<u64> = self.iter_from_zero().take(horizon.max(2)).collect();
        let mut first_violation = None;
        for (l, w) in pts.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::Schedule(format!("not increasing at index {}", l + 1)));
            }
            let cap = self.lambda * w[0] as f64 + self.k;
            if first_violation.is_none() && w[1] as f64 > cap * (1.0 + 1e-12) {
                first_violation = Some(l as u64);
            }
        }
        let increments = match &self.kind {
            ScheduleKind::AllNaturals | ScheduleKind::Arithmetic { .. } => GrowthStatus::Pass,
            ScheduleKind::Geometric { ratio, .. } => {
                if *ratio > 1.0 {
                    GrowthStatus::Pass
                } else {
                    GrowthStatus::Fail
                }
            }
            ScheduleKind::Explicit { .. } => GrowthStatus::PrefixOnly,
        };
        Ok(ScheduleAudit { growth_ok: first_violation.is_none(), first_violation, increments, audited: pts.len() })
    }

    /// Smallest `ℓ ≥ 1` with `N_ℓ > m`, and `N_ℓ`.
    pub fn tau_index(&self, m: f64) -> Result<(u64, u64)> {
        if !m.is_finite() {
            return Err(Error::ExhaustedSchedule { m });
        }
        if let ScheduleKind::AllNaturals = self.kind {
            let n = (m.floor() as u64 + 1).max(1);
            return Ok((n, n));
        }
        if let ScheduleKind::Arithmetic { n0, step } = self.kind {
            // N_ℓ > m  ⇔  ℓ > (m - n0)/step
            let l = if m < n0 as f64 { 1 } else { (((m - n0 as f64) / step as f64).floor() as u64 + 1).max(1) };
            return Ok((l, n0 + l * step));
        }
        self.iter()
            .enumerate()
            .find(|&(_, n)| n as f64 > m)
            .map(|(i, n)| (i as u64 + 1, n))
            .ok_or(Error::ExhaustedSchedule { m })
    }
}

pub struct ScheduleIter<'a> {
    schedule: &'a Schedule,
    index: u64,
    prev: Option<u64>,
}

impl Iterator for ScheduleIter<'_> {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let l = self.index;
        let out = match &self.schedule.kind {
            ScheduleKind::Geometric { n0, ratio } => match self.prev {
                None => Some(*n0),
                Some(p) => {
                    let grown = (ratio * p as f64).ceil();
                    if grown >= u64::MAX as f64 {
                        None
                    } else {
                        Some((grown as u64).max(p + 1))
                    }
                }
            },
            _ => self.schedule.element(l),
        }?;
        self.index += 1;
        self.prev = Some(out);
        Some(out)
    }
}
