use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{par_runs, Estimate, McSummary, SimOptions, StopRule};
use crate::error::{Error, Result};
use crate::geometry::Region;
use crate::rng::{aux_stream, stream, StreamRng};

/// Exit-time estimates at step `dt` and `dt/4`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrownianSummary {
    pub coarse: McSummary,
    pub fine: McSummary,
    pub dt: f64,
    /// `|fine - coarse|`, a proxy for the discretization error of the fine estimate.
    pub discretization: f64,
}

/// Euler paths `W += drift·dt + √dt·diffusion·ξ`, stopped by `region`; the exit time is
/// interpolated linearly inside the step where the rule first fires. `t_max` caps time.
pub fn run_brownian(
    region: &Region,
    drift: &[f64],
    diffusion: &[f64],
    dt: f64,
    t_max: f64,
    opts: &SimOptions,
) -> Result<BrownianSummary> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::ParameterDomain(format!("step dt = {dt} must be positive")));
    }
    if drift.len() != region.dim() || diffusion.len() != drift.len() {
        return Err(Error::Config("drift, diffusion and region dimensions differ".into()));
    }
    if diffusion.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::ParameterDomain("diffusion coefficients must be nonnegative".into()));
    }
    let rule = StopRule::new(region, opts.strict);
    let coarse = exit_times(&rule, drift, diffusion, dt, t_max, opts, stream)?;
    let fine = exit_times(&rule, drift, diffusion, dt / 4.0, t_max, opts, aux_stream)?;
    let discretization = (fine.mean - coarse.mean).abs();
    Ok(BrownianSummary { coarse, fine, dt, discretization })
}

fn exit_times(
    rule: &StopRule,
    drift: &[f64],
    diffusion: &[f64],
    dt: f64,
    t_max: f64,
    opts: &SimOptions,
    rng_for: fn(u64, u64) -> StreamRng,
) -> Result<McSummary> {
    let max_steps = (t_max / dt).ceil() as u64;
    let runs = if diffusion.iter().all(|s| *s == 0.0) {
        let mut rng = rng_for(opts.seed, 0);
        let (t, truncated) = path_exit(rule, drift, diffusion, dt, max_steps, &mut rng);
        let t = if truncated { t } else { refine_line_exit(rule, drift, t, dt) };
        vec![(t, truncated); opts.n_runs]
    } else {
        par_runs(opts.n_runs, opts.workers, |idx| {
            path_exit(rule, drift, diffusion, dt, max_steps, &mut rng_for(opts.seed, idx))
        })
    };
    let truncated = runs.iter().filter(|r| r.1).count();
    if truncated == runs.len() {
        return Err(Error::AllTruncated { horizon: max_steps });
    }
    let times: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let est = Estimate::from_values(&times);
    Ok(McSummary {
        mean: est.mean,
        stderr: est.stderr,
        n_runs: runs.len(),
        truncated,
        horizon: t_max,
        seed: opts.seed,
        extras: BTreeMap::new(),
        initial_violations: 0,
    })
}

fn path_exit(
    rule: &StopRule,
    drift: &[f64],
    diffusion: &[f64],
    dt: f64,
    max_steps: u64,
    rng: &mut StreamRng,
) -> (f64, bool) {
    let sqrt_dt = dt.sqrt();
    let mut w = vec![0.0; drift.len()];
    let mut prev = rule.exit_level(0.0, &w);
    for k in 1..=max_steps {
        for j in 0..w.len() {
            let xi: f64 = if diffusion[j] > 0.0 { StandardNormal.sample(rng) } else { 0.0 };
            w[j] += drift[j] * dt + sqrt_dt * diffusion[j] * xi;
        }
        let t = k as f64 * dt;
        if rule.stops(t, &w) {
            let level = rule.exit_level(t, &w);
            let t0 = (k - 1) as f64 * dt;
            let frac = if level > prev && prev <= 0.0 { -prev / (level - prev) } else { 1.0 };
            return (t0 + dt * frac.clamp(0.0, 1.0), false);
        }
        prev = rule.exit_level(t, &w);
    }
    (max_steps as f64 * dt, true)
}

/// Exit time of the straight path `t ↦ drift·t` near the interpolated time `t`, bisected
/// down to adjacent floats; of the two, the one sitting on the boundary is returned.
fn refine_line_exit(rule: &StopRule, drift: &[f64], t: f64, dt: f64) -> f64 {
    let at = |t: f64| -> Vec<f64> { drift.iter().map(|m| m * t).collect() };
    let (mut lo, mut hi) = ((t - dt).max(0.0), t + dt);
    if rule.stops(lo, &at(lo)) || !rule.stops(hi, &at(hi)) {
        return t;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if rule.stops(mid, &at(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let gap = |t: f64| rule.exit_level(t, &at(t)).abs();
    if gap(lo) <= gap(hi) {
        lo
    } else {
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Boundary, RegionKind, Side};

    #[test]
    fn drift_only_exit_is_exact() {
        let region = Region::scalar(Boundary::Constant { c: 4.0 }, Side::Below, RegionKind::Continuity).unwrap();
        for dt in [1.0, 0.5, 0.125, 0.1, 0.01, 1.0 / 64.0, 0.003] {
            let o = SimOptions { n_runs: 4, ..SimOptions::default() };
            let s = run_brownian(&region, &[0.5], &[0.0], dt, 100.0, &o).unwrap();
            assert_eq!(s.coarse.mean, 8.0, "dt={dt}");
            assert_eq!(s.fine.mean, 8.0);
            assert_eq!(s.coarse.stderr, 0.0);
            assert_eq!(s.discretization, 0.0);
        }
        let line = Region::scalar(Boundary::Affine { slope: 1.0, intercept: 10.0 }, Side::Above, RegionKind::Stopping)
            .unwrap();
        let o = SimOptions { n_runs: 3, ..SimOptions::default() };
        let s = run_brownian(&line, &[2.0], &[0.0], 0.01, 100.0, &o).unwrap();
        assert_eq!(s.fine.mean, 10.0);
    }

    #[test]
    fn invalid_step_is_rejected() {
        let region = Region::scalar(Boundary::Constant { c: 4.0 }, Side::Below, RegionKind::Continuity).unwrap();
        assert!(run_brownian(&region, &[0.5], &[1.0], 0.0, 10.0, &SimOptions::default()).is_err());
    }
}
