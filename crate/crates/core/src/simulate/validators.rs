//! Empirical checks of the convexity, Jensen, Wald and Lorden-type inequalities.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use super::{Estimate, RunRecord};
use crate::error::{Error, Result};
use crate::gfun::GFun;
use crate::moments::ScalarFamily;
use crate::rng::{aux_stream, pairwise_sum, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValidatorTag {
    ConvexMean,
    Perspective,
    JensenT3,
    WaldT4I,
    WaldT4II,
    LpNorm,
    LordenT6,
    LordenT7,
}

impl ValidatorTag {
    pub const ALL: [ValidatorTag; 8] = [
        Self::ConvexMean,
        Self::Perspective,
        Self::JensenT3,
        Self::WaldT4I,
        Self::WaldT4II,
        Self::LpNorm,
        Self::LordenT6,
        Self::LordenT7,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ConvexMean => "convex-mean",
            Self::Perspective => "perspective",
            Self::JensenT3 => "jensen-T3",
            Self::WaldT4I => "wald-T4-I",
            Self::WaldT4II => "wald-T4-II",
            Self::LpNorm => "lp-norm",
            Self::LordenT6 => "lorden-T6",
            Self::LordenT7 => "lorden-T7",
        }
    }
}

impl fmt::Display for ValidatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ValidatorTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownTag(s.to_string()))
    }
}

/// Result of one validator: `lhs ≥ rhs` is the checked direction unless noted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub name: String,
    pub pass: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`.
    pub margin: f64,
    pub stderr: f64,
    pub trials: usize,
    pub witness: Option<String>,
}

impl Outcome {
    /// `lhs ≥ rhs` within four standard errors of the margin.
    fn at_least(name: impl Into<String>, lhs: f64, rhs: f64, stderr: f64, trials: usize) -> Self {
        let margin = lhs - rhs;
        Self {
            name: name.into(),
            pass: margin + 4.0 * stderr + 1e-9 * (1.0 + rhs.abs()) >= 0.0,
            lhs,
            rhs,
            margin,
            stderr,
            trials,
            witness: None,
        }
    }

    /// `lhs = rhs` within four standard errors.
    fn equal(name: impl Into<String>, lhs: f64, rhs: f64, stderr: f64, trials: usize) -> Self {
        let margin = lhs - rhs;
        Self {
            name: name.into(),
            pass: margin.abs() <= 4.0 * stderr + 1e-9 * (1.0 + rhs.abs()),
            lhs,
            rhs,
            margin,
            stderr,
            trials,
            witness: None,
        }
    }
}

/// Closed polytope `{x : a_i·x ≤ b_i}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polytope {
    pub faces: Vec<(Vec<f64>, f64)>,
}

impl Polytope {
    /// First face violated by more than `slack`.
    pub fn violated(&self, x: &[f64], slack: f64) -> Option<usize> {
        self.faces.iter().position(|(a, b)| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() > b + slack)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.violated(x, 1e-9).is_none()
    }
}

/// Draws points from `sampler`, all inside `set`, and checks that their running mean
/// stays in `set`. The mean is checked after 1, 2, 4, ... draws and at the end.
pub fn validate_convex_mean(
    set: &dyn Fn(&[f64]) -> bool,
    sampler: &mut dyn FnMut(&mut StreamRng) -> Vec<f64>,
    n_samples: usize,
    seed: u64,
) -> Outcome {
    let mut rng = aux_stream(seed, 101);
    let mut sum: Vec<f64> = Vec::new();
    let mut next_check = 1;
    let mut outcome = Outcome {
        name: "convex-mean".into(),
        pass: true,
        lhs: 0.0,
        rhs: 0.0,
        margin: 0.0,
        stderr: 0.0,
        trials: 0,
        witness: None,
    };
    for i in 1..=n_samples {
        let x = sampler(&mut rng);
        if sum.is_empty() {
            sum = vec![0.0; x.len()];
        }
        if !set(&x) {
            outcome.pass = false;
            outcome.trials = i;
            outcome.witness = Some(format!("sampler produced {x:?} outside the set"));
            return outcome;
        }
        for (acc, v) in sum.iter_mut().zip(&x) {
            *acc += v;
        }
        if i == next_check || i == n_samples {
            next_check *= 2;
            let mean: Vec<f64> = sum.iter().map(|v| v / i as f64).collect();
            if !set(&mean) {
                outcome.pass = false;
                outcome.trials = i;
                outcome.witness = Some(format!("mean {mean:?} of {i} draws lies outside the set"));
                return outcome;
            }
        }
    }
    outcome.trials = n_samples;
    outcome
}

/// Polytope form of [`validate_convex_mean`]; the witness names the violated face.
pub fn validate_polytope_mean(
    poly: &Polytope,
    sampler: &mut dyn FnMut(&mut StreamRng) -> Vec<f64>,
    n_samples: usize,
    seed: u64,
) -> Outcome {
    let member = |x: &[f64]| poly.contains(x);
    let mut out = validate_convex_mean(&member, sampler, n_samples, seed);
    if let Some(w) = &out.witness {
        if let Some(start) = w.find('[') {
            let end = w.find(']').unwrap_or(w.len() - 1);
            let coords: Vec<f64> = w[start + 1..end].split(',').filter_map(|v| v.trim().parse().ok()).collect();
            if let Some(face) = poly.violated(&coords, 1e-9) {
                out.witness = Some(format!("{w}; violates face {face}"));
            }
        }
    }
    out
}

/// Randomized check that `t·g(s/t)` is jointly convex in `(t, s)` for `t > 0`.
pub fn validate_perspective(g: &GFun, n_trials: usize, seed: u64) -> Outcome {
    let mut rng = aux_stream(seed, 202);
    let f = |t: f64, s: f64| t * g.value(s / t);
    for i in 1..=n_trials {
        let (t1, t2) = (rng.random_range(0.05..10.0), rng.random_range(0.05..10.0));
        let (s1, s2) = (t1 * rng.random_range(-3.0..3.0), t2 * rng.random_range(-3.0..3.0));
        let rho: f64 = rng.random_range(0.0..1.0);
        let lhs = f(rho * t1 + (1.0 - rho) * t2, rho * s1 + (1.0 - rho) * s2);
        let rhs = rho * f(t1, s1) + (1.0 - rho) * f(t2, s2);
        if !lhs.is_finite() || !rhs.is_finite() {
            continue;
        }
        if lhs > rhs + 1e-10 * (1.0 + rhs.abs()) {
            return Outcome {
                name: "perspective".into(),
                pass: false,
                lhs: rhs,
                rhs: lhs,
                margin: rhs - lhs,
                stderr: 0.0,
                trials: i,
                witness: Some(format!("P1=({t1}, {s1}), P2=({t2}, {s2}), rho={rho}")),
            };
        }
    }
    Outcome {
        name: "perspective".into(),
        pass: true,
        lhs: 0.0,
        rhs: 0.0,
        margin: 0.0,
        stderr: 0.0,
        trials: n_trials,
        witness: None,
    }
}

/// `E[Y g(Z/Y)] ≥ E[Y] g(E[Z]/E[Y])` for independent positive `Y` and convex `g`.
pub fn validate_jensen(y: &ScalarFamily, z: &ScalarFamily, g: &GFun, n: usize, seed: u64) -> Result<Outcome> {
    if !y.is_positive() {
        return Err(Error::ParameterDomain("Y must be positive".into()));
    }
    let mut rng = aux_stream(seed, 303);
    let vals: Vec<f64> = (0..n)
        .map(|_| {
            let (yv, zv) = (y.sample(&mut rng), z.sample(&mut rng));
            yv * g.value(zv / yv)
        })
        .collect();
    let est = Estimate::from_values(&vals);
    let rhs = y.mean() * g.value(z.mean() / y.mean());
    Ok(Outcome::at_least("jensen-T3", est.mean, rhs, est.stderr, n))
}

fn completed(records: &[RunRecord]) -> Vec<&RunRecord> {
    records.iter().filter(|r| !r.truncated).collect()
}

/// Difference estimate `E[a_i - b_i]` over completed runs.
fn paired(records: &[&RunRecord], f: impl Fn(&RunRecord) -> (f64, f64)) -> (f64, f64, Estimate) {
    let pairs: Vec<(f64, f64)> = records.iter().map(|r| f(r)).collect();
    let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let n = pairs.len() as f64;
    (pairwise_sum(&a) / n, pairwise_sum(&b) / n, Estimate::from_values(&diff))
}

/// `E[S_N] = E[N]·μ`, per component.
pub fn validate_wald_identity(records: &[RunRecord], mu: &[f64]) -> Vec<Outcome> {
    let runs = completed(records);
    (0..mu.len())
        .map(|k| {
            let (lhs, rhs, d) = paired(&runs, |r| (r.s_n[k], r.n as f64 * mu[k]));
            let name = if mu.len() == 1 { "wald-identity".to_string() } else { format!("wald-identity[{k}]") };
            Outcome::equal(name, lhs, rhs, d.stderr, runs.len())
        })
        .collect()
}

/// `E[N g(X̄_N)] ≥ E[N] g(μ)` for convex `g` on scalar increments.
pub fn validate_wald_mean(records: &[RunRecord], mu: f64, g: &GFun) -> Outcome {
    let runs = completed(records);
    let g_mu = g.value(mu);
    let (lhs, rhs, d) = paired(&runs, |r| {
        let n = r.n as f64;
        (n * g.value(r.s_n[0] / n), n * g_mu)
    });
    Outcome::at_least("wald-T4-I", lhs, rhs, d.stderr, runs.len())
}

/// `E[N g(V̄_N)] ≥ E[N] g(ν)` with `V̄_N = (S_N - Nμ)²/N`, for convex `g`.
pub fn validate_wald_variance(records: &[RunRecord], mu: f64, nu: f64, g: &GFun) -> Outcome {
    let runs = completed(records);
    let g_nu = g.value(nu);
    let (lhs, rhs, d) = paired(&runs, |r| {
        let n = r.n as f64;
        let v = (r.s_n[0] - n * mu).powi(2) / n;
        (n * g.value(v), n * g_nu)
    });
    Outcome::at_least("wald-T4-II", lhs, rhs, d.stderr, runs.len())
}

fn lp(x: &[f64], p: f64) -> f64 {
    x.iter().map(|v| v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `E‖S_N‖_p ≥ E[N]‖μ‖_p` and `E‖V_N‖_p ≥ E[N]‖ν‖_p` with `V_N = (S_N - Nμ)²` elementwise.
pub fn validate_lp_norm(records: &[RunRecord], mu: &[f64], nu: &[f64], p: f64) -> Vec<Outcome> {
    let runs = completed(records);
    let (mu_p, nu_p) = (lp(mu, p), lp(nu, p));
    let (l1, r1, d1) = paired(&runs, |r| (lp(&r.s_n, p), r.n as f64 * mu_p));
    let (l2, r2, d2) = paired(&runs, |r| {
        let n = r.n as f64;
        let v: Vec<f64> = r.s_n.iter().zip(mu).map(|(s, m)| (s - n * m).powi(2)).collect();
        (lp(&v, p), n * nu_p)
    });
    vec![
        Outcome::at_least(format!("lp-norm-mean(p={p})"), l1, r1, d1.stderr, runs.len()),
        Outcome::at_least(format!("lp-norm-variance(p={p})"), l2, r2, d2.stderr, runs.len()),
    ]
}

/// Mean overshoot against an upper bound.
pub fn validate_overshoot(name: &str, overshoot: Estimate, bound: f64, trials: usize) -> Outcome {
    Outcome::at_least(name, bound, overshoot.mean, overshoot.stderr, trials)
}
