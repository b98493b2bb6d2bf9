//! Monte Carlo simulation of stopping times, Brownian exit times and renewal
//! overshoots, plus empirical checks of the convexity and Wald-type inequalities.
//!
//! Run `i` draws from its own stream `(seed, i)` and results are reduced in run
//! order, so estimates do not depend on the number of workers.

mod brownian;
mod overshoot;
pub mod validators;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Region, RegionKind};
use crate::moments::DistributionSpec;
use crate::rng::{pairwise_sum, stream};
use crate::schedules::Schedule;

pub use brownian::{run_brownian, BrownianSummary};
pub use overshoot::{run_overshoot, OvershootRecord};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOptions {
    pub n_runs: usize,
    /// Largest sample size a discrete run may reach.
    pub horizon: u64,
    pub seed: u64,
    /// Worker threads; zero uses the global pool.
    pub workers: usize,
    /// Use interior membership instead of closed-region membership.
    pub strict: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { n_runs: 10_000, horizon: 1_000_000, seed: 0, workers: 0, strict: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Sample mean and `sd/√n`, reduced pairwise in slice order.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: f64::NAN, stderr: f64::NAN };
        }
        let mean = pairwise_sum(values) / n;
        if values.len() < 2 {
            return Self { mean, stderr: 0.0 };
        }
        let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1.0);
        Self { mean, stderr: (var / n).sqrt() }
    }
}

/// Aggregated Monte Carlo estimate of a mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub mean: f64,
    pub stderr: f64,
    pub n_runs: usize,
    /// Runs that hit the horizon; their value is the horizon itself.
    pub truncated: usize,
    pub horizon: f64,
    pub seed: u64,
    /// Secondary means such as `S_N` components and `M`.
    pub extras: BTreeMap<String, Estimate>,
    /// Runs whose starting point lay outside the closed continuity region.
    pub initial_violations: usize,
}

impl McSummary {
    pub fn estimate(&self) -> Estimate {
        Estimate { mean: self.mean, stderr: self.stderr }
    }

    /// Truncation biases the mean downwards, so only upper bounds can be checked.
    pub fn downward_biased(&self) -> bool {
        self.truncated > 0
    }
}

/// One simulated path of a discrete stopping rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub n: u64,
    pub s_n: Vec<f64>,
    /// Last schedule point strictly before `n` (`N_0` if the first check stopped).
    pub m: u64,
    pub truncated: bool,
    pub initial_violation: bool,
}

/// Maps `f` over run indices on the requested number of workers, keeping index order.
pub(crate) fn par_runs<T, F>(n_runs: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    let body = || (0..n_runs as u64).into_par_iter().map(&f).collect();
    if workers == 0 {
        body()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(body),
            Err(_) => body(),
        }
    }
}

/// Decides when a path stops.
#[derive(Debug, Clone)]
pub(crate) struct StopRule {
    region: Region,
    strict: bool,
}

impl StopRule {
    pub(crate) fn new(region: &Region, strict: bool) -> Self {
        Self { region: region.clone(), strict }
    }

    pub(crate) fn stops(&self, t: f64, s: &[f64]) -> bool {
        let inside = if self.strict { self.region.contains_strict(t, s) } else { self.region.contains(t, s) };
        match self.region.kind() {
            RegionKind::Continuity => !inside,
            RegionKind::Stopping => inside,
        }
    }

    /// Positive once the path has stopped, used to interpolate exit times.
    pub(crate) fn exit_level(&self, t: f64, s: &[f64]) -> f64 {
        match self.region.kind() {
            RegionKind::Continuity => self.region.constraint(t, s),
            RegionKind::Stopping => -self.region.constraint(t, s),
        }
    }

    /// Whether `(t, s)` lies in the closed continuity region.
    pub(crate) fn continues_closed(&self, t: f64, s: &[f64]) -> bool {
        match self.region.kind() {
            RegionKind::Continuity => self.region.contains(t, s),
            RegionKind::Stopping => !self.region.contains_strict(t, s),
        }
    }
}

/// Simulates every run and returns the per-run records.
pub fn simulate_runs(
    region: &Region,
    spec: &DistributionSpec,
    schedule: &Schedule,
    opts: &SimOptions,
) -> Result<Vec<RunRecord>> {
    if region.dim() != spec.dim() {
        return Err(Error::Config("region and distribution dimensions differ".into()));
    }
    if opts.n_runs == 0 {
        return Err(Error::Config("n_runs must be positive".into()));
    }
    spec.validate()?;
    let rule = StopRule::new(region, opts.strict);
    let d = spec.dim();
    let records = par_runs(opts.n_runs, opts.workers, |idx| {
        let mut rng = stream(opts.seed, idx);
        let mut s = vec![0.0; d];
        let mut x = vec![0.0; d];
        let mut n = 0u64;
        let mut advance = |target: u64, s: &mut Vec<f64>, n: &mut u64| {
            while *n < target {
                spec.sample_into(&mut rng, &mut x);
                for (acc, xi) in s.iter_mut().zip(&x) {
                    *acc += xi;
                }
                *n += 1;
            }
        };
        let mut points = schedule.iter_from_zero();
        let n0 = points.next().unwrap_or(0);
        if n0 > opts.horizon {
            return RunRecord { n: opts.horizon, s_n: s, m: n0, truncated: true, initial_violation: false };
        }
        advance(n0, &mut s, &mut n);
        let initial_violation = !rule.continues_closed(n0 as f64, &s);
        let mut m = n0;
        for target in points {
            if target > opts.horizon {
                break;
            }
            advance(target, &mut s, &mut n);
            if rule.stops(target as f64, &s) {
                return RunRecord { n: target, s_n: s, m, truncated: false, initial_violation };
            }
            m = target;
        }
        // horizon reached or schedule exhausted
        RunRecord { n: opts.horizon, s_n: s, m, truncated: true, initial_violation }
    });
    if records.iter().all(|r| r.truncated) {
        return Err(Error::AllTruncated { horizon: opts.horizon });
    }
    Ok(records)
}

/// Summarizes discrete runs: `E[N]` plus `E[S_N]` components and `E[M]`.
pub fn summarize_runs(records: &[RunRecord], opts: &SimOptions) -> McSummary {
    let ns: Vec<f64> = records.iter().map(|r| r.n as f64).collect();
    let est = Estimate::from_values(&ns);
    let mut extras = BTreeMap::new();
    let d = records.first().map_or(0, |r| r.s_n.len());
    for k in 0..d {
        let col: Vec<f64> = records.iter().map(|r| r.s_n[k]).collect();
        let key = if d == 1 { "S_N".to_string() } else { format!("S_N[{k}]") };
        extras.insert(key, Estimate::from_values(&col));
    }
    let ms: Vec<f64> = records.iter().map(|r| r.m as f64).collect();
    extras.insert("M".into(), Estimate::from_values(&ms));
    McSummary {
        mean: est.mean,
        stderr: est.stderr,
        n_runs: records.len(),
        truncated: records.iter().filter(|r| r.truncated).count(),
        horizon: opts.horizon as f64,
        seed: opts.seed,
        extras,
        initial_violations: records.iter().filter(|r| r.initial_violation).count(),
    }
}

/// Estimates `E[N]` for a discrete stopping rule.
pub fn run_discrete(
    region: &Region,
    spec: &DistributionSpec,
    schedule: &Schedule,
    opts: &SimOptions,
) -> Result<McSummary> {
    let records = simulate_runs(region, spec, schedule, opts)?;
    Ok(summarize_runs(&records, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Boundary, Side};
    use crate::moments::ScalarFamily;

    fn opts(n_runs: usize) -> SimOptions {
        SimOptions { n_runs, seed: 42, ..SimOptions::default() }
    }

    #[test]
    fn deterministic_walks() {
        let spec = DistributionSpec::Scalar(ScalarFamily::PointMass { value: 1.0 });
        let region = Region::scalar(Boundary::Constant { c: 5.0 }, Side::Below, RegionKind::Continuity).unwrap();
        let s = run_discrete(&region, &spec, &Schedule::all_naturals(), &opts(100)).unwrap();
        assert_eq!(s.mean, 6.0);
        assert_eq!(s.stderr, 0.0);
        assert_eq!(s.extras["M"].mean, 5.0);

        let spec = DistributionSpec::Scalar(ScalarFamily::PointMass { value: 2.0 });
        let stop = Region::scalar(Boundary::Affine { slope: 1.0, intercept: 10.0 }, Side::Above, RegionKind::Stopping)
            .unwrap();
        let s = run_discrete(&stop, &spec, &Schedule::all_naturals(), &opts(50)).unwrap();
        assert_eq!(s.mean, 10.0);
    }

    #[test]
    fn strict_convention_stops_on_the_boundary() {
        let spec = DistributionSpec::Scalar(ScalarFamily::PointMass { value: 1.0 });
        let region = Region::scalar(Boundary::Constant { c: 5.0 }, Side::Below, RegionKind::Continuity).unwrap();
        let o = SimOptions { strict: true, ..opts(10) };
        assert_eq!(run_discrete(&region, &spec, &Schedule::all_naturals(), &o).unwrap().mean, 5.0);
    }

    #[test]
    fn schedule_points_only() {
        let spec = DistributionSpec::Scalar(ScalarFamily::BernoulliAffine { x0: 0.0, x1: 1.0, p: 0.5 });
        let stop = Region::scalar(Boundary::Constant { c: 5.0 }, Side::Above, RegionKind::Stopping).unwrap();
        let sched = Schedule::geometric(2, 1.5).unwrap();
        let allowed: Vec<u64> = sched.iter().take(40).collect();
        let recs = simulate_runs(&stop, &spec, &sched, &opts(2000)).unwrap();
        for r in &recs {
            assert!(allowed.contains(&r.n));
            assert!(r.m < r.n);
            assert!(r.m == 2 || allowed.contains(&r.m));
            assert!(r.s_n[0] >= 5.0);
        }
    }

    #[test]
    fn all_truncated_is_an_error() {
        let spec = DistributionSpec::Scalar(ScalarFamily::PointMass { value: 0.0 });
        let region = Region::scalar(Boundary::Constant { c: 5.0 }, Side::Below, RegionKind::Continuity).unwrap();
        let o = SimOptions { horizon: 50, ..opts(10) };
        assert!(matches!(
            run_discrete(&region, &spec, &Schedule::all_naturals(), &o),
            Err(Error::AllTruncated { horizon: 50 })
        ));
    }

    #[test]
    fn worker_count_does_not_change_estimates() {
        let spec = DistributionSpec::Scalar(ScalarFamily::Uniform { lo: -0.5, hi: 1.5 });
        let region =
            Region::scalar(Boundary::Power { c: 2.0, gamma: 0.5 }, Side::Below, RegionKind::Continuity).unwrap();
        let one =
            run_discrete(&region, &spec, &Schedule::all_naturals(), &SimOptions { workers: 1, ..opts(3000) }).unwrap();
        let many =
            run_discrete(&region, &spec, &Schedule::all_naturals(), &SimOptions { workers: 8, ..opts(3000) }).unwrap();
        assert_eq!(one, many);
        assert_eq!(one.mean.to_bits(), many.mean.to_bits());
    }
}
