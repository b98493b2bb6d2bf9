//! Increment distributions with closed-form moments.
//!
//! Every bound in this crate consumes exact moments of the i.i.d. increment
//! `X`: the mean `μ`, the one-sided absolute deviations `E[(X-μ)^±]`, the
//! variance `ν`, and (for bounded families) the support box `[a, b]` together
//! with `v = (μ-a)(b-μ)/(b-a)`, which dominates both one-sided deviations.
//! Nothing here is estimated from samples.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// A scalar increment law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ScalarFamily {
    PointMass {
        value: f64,
    },
    /// Takes `x1` with probability `p` and `x0` otherwise.
    BernoulliAffine {
        x0: f64,
        x1: f64,
        p: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
    Gaussian {
        mean: f64,
        sd: f64,
    },
    Exponential {
        rate: f64,
    },
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

impl ScalarFamily {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::ParameterDomain(msg));
        match *self {
            Self::PointMass { value } if !value.is_finite() => bad(format!("point mass at {value}")),
            Self::BernoulliAffine { x0, x1, p } => {
                if !(0.0..=1.0).contains(&p) {
                    bad(format!("bernoulli-affine p = {p} outside [0, 1]"))
                } else if !(x0.is_finite() && x1.is_finite()) || x0 >= x1 {
                    bad(format!("bernoulli-affine requires x0 < x1, got {x0}, {x1}"))
                } else {
                    Ok(())
                }
            }
            Self::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite()) || lo >= hi => {
                bad(format!("uniform interval [{lo}, {hi}]"))
            }
            Self::Gaussian { mean, sd } if !mean.is_finite() || !(sd.is_finite() && sd >= 0.0) => {
                bad(format!("gaussian mean {mean}, sd {sd}"))
            }
            Self::Exponential { rate } if !(rate.is_finite() && rate > 0.0) => bad(format!("exponential rate {rate}")),
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::PointMass { value } => value,
            Self::BernoulliAffine { x0, x1, p } => x0 + p * (x1 - x0),
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Gaussian { mean, .. } => mean,
            Self::Exponential { rate } => 1.0 / rate,
        }
    }

    /// `E[(X-μ)^+]`, which equals `E[(X-μ)^-]` for every law with a mean.
    pub fn abs_dev_half(&self) -> f64 {
        match *self {
            Self::PointMass { .. } => 0.0,
            Self::BernoulliAffine { x0, x1, p } => p * (1.0 - p) * (x1 - x0),
            Self::Uniform { lo, hi } => (hi - lo) / 8.0,
            Self::Gaussian { sd, .. } => sd * INV_SQRT_2PI,
            Self::Exponential { rate } => (-1.0f64).exp() / rate,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::PointMass { .. } => 0.0,
            Self::BernoulliAffine { x0, x1, p } => p * (1.0 - p) * (x1 - x0).powi(2),
            Self::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            Self::Gaussian { sd, .. } => sd * sd,
            Self::Exponential { rate } => 1.0 / (rate * rate),
        }
    }

    /// `E[|X-μ|^3]`.
    pub fn abs_third(&self) -> f64 {
        match *self {
            Self::PointMass { .. } => 0.0,
            Self::BernoulliAffine { x0, x1, p } => p * (1.0 - p) * ((1.0 - p).powi(2) + p * p) * (x1 - x0).powi(3),
            Self::Uniform { lo, hi } => (hi - lo).powi(3) / 32.0,
            Self::Gaussian { sd, .. } => 2.0 * (2.0 / std::f64::consts::PI).sqrt() * sd.powi(3),
            // E|E-1|^3 = 12/e - 2 for a unit exponential.
            Self::Exponential { rate } => (12.0 / std::f64::consts::E - 2.0) / rate.powi(3),
        }
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            Self::PointMass { value } => Some((value, value)),
            Self::BernoulliAffine { x0, x1, .. } => Some((x0, x1)),
            Self::Uniform { lo, hi } => Some((lo, hi)),
            Self::Gaussian { sd: 0.0, mean } => Some((mean, mean)),
            _ => None,
        }
    }

    /// True when the law puts all of its mass on `(0, ∞)`.
    pub fn is_positive(&self) -> bool {
        match *self {
            Self::PointMass { value } => value > 0.0,
            Self::BernoulliAffine { x0, .. } => x0 > 0.0,
            Self::Uniform { lo, .. } => lo >= 0.0,
            Self::Gaussian { mean, sd } => sd == 0.0 && mean > 0.0,
            Self::Exponential { .. } => true,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::PointMass { value } => value,
            Self::BernoulliAffine { x0, x1, p } => {
                if rng.random::<f64>() < p {
                    x1
                } else {
                    x0
                }
            }
            Self::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Self::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            Self::Exponential { rate } => {
                let e: f64 = rng.sample(Exp1);
                e / rate
            }
        }
    }

    /// `Pr{X < x}` (left limit of the CDF).
    pub fn prob_below(&self, x: f64) -> f64 {
        match *self {
            Self::PointMass { value } => f64::from(value < x),
            Self::BernoulliAffine { x0, x1, p } => (1.0 - p) * f64::from(x0 < x) + p * f64::from(x1 < x),
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Gaussian { mean, sd } => {
                if sd == 0.0 {
                    f64::from(mean < x)
                } else {
                    normal_cdf((x - mean) / sd)
                }
            }
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
        }
    }

    /// `E[(X - x)^+]`.
    pub fn excess_mean(&self, x: f64) -> f64 {
        match *self {
            Self::PointMass { value } => (value - x).max(0.0),
            Self::BernoulliAffine { x0, x1, p } => (1.0 - p) * (x0 - x).max(0.0) + p * (x1 - x).max(0.0),
            Self::Uniform { lo, hi } => {
                if x <= lo {
                    0.5 * (lo + hi) - x
                } else if x >= hi {
                    0.0
                } else {
                    (hi - x).powi(2) / (2.0 * (hi - lo))
                }
            }
            Self::Gaussian { mean, sd } => {
                if sd == 0.0 {
                    (mean - x).max(0.0)
                } else {
                    let z = (x - mean) / sd;
                    sd * normal_pdf(z) + (mean - x) * normal_cdf(-z)
                }
            }
            Self::Exponential { rate } => {
                if x <= 0.0 {
                    1.0 / rate - x
                } else {
                    (-rate * x).exp() / rate
                }
            }
        }
    }

    pub fn second_moment(&self) -> f64 {
        self.variance() + self.mean().powi(2)
    }

    /// `E[((aX + b)^+)^2]`.
    pub fn affine_pos_second_moment(&self, a: f64, b: f64) -> f64 {
        let pos_sq = |y: f64| y.max(0.0).powi(2);
        if a == 0.0 {
            return pos_sq(b);
        }
        match *self {
            Self::PointMass { value } => pos_sq(a * value + b),
            Self::BernoulliAffine { x0, x1, p } => (1.0 - p) * pos_sq(a * x0 + b) + p * pos_sq(a * x1 + b),
            Self::Uniform { lo, hi } => {
                // aX+b is uniform on [y0, y1]
                let (y0, y1) = {
                    let (u, v) = (a * lo + b, a * hi + b);
                    (u.min(v), u.max(v))
                };
                if y1 <= 0.0 {
                    0.0
                } else {
                    let from = y0.max(0.0);
                    (y1.powi(3) - from.powi(3)) / (3.0 * (y1 - y0))
                }
            }
            Self::Gaussian { mean, sd } => {
                let (m, s) = (a * mean + b, a.abs() * sd);
                if s == 0.0 {
                    pos_sq(m)
                } else {
                    let z = m / s;
                    (m * m + s * s) * normal_cdf(z) + m * s * normal_pdf(z)
                }
            }
            Self::Exponential { rate: r } => {
                if a > 0.0 {
                    let x0 = (-b / a).max(0.0);
                    let c = a * x0 + b;
                    (-r * x0).exp() * (2.0 * a * a / (r * r) + 2.0 * a * c / r + c * c)
                } else if b <= 0.0 {
                    0.0
                } else {
                    let x1 = -b / a;
                    b * b + 2.0 * a * b / r + 2.0 * a * a / (r * r) * (1.0 - (-r * x1).exp())
                }
            }
        }
    }

    /// Cumulant generating function `ln E[e^{θX}]`; `+∞` where it diverges.
    pub fn log_mgf(&self, theta: f64) -> f64 {
        match *self {
            Self::PointMass { value } => theta * value,
            Self::BernoulliAffine { x0, x1, p } => {
                let w = theta * (x1 - x0);
                // ln(1 - p + p e^w), computed without overflow for large |w|
                let tail = if w > 0.0 { w + ((1.0 - p) * (-w).exp() + p).ln() } else { (1.0 - p + p * w.exp()).ln() };
                theta * x0 + tail
            }
            Self::Uniform { lo, hi } => {
                let w = theta * (hi - lo);
                if w.abs() < 1e-12 {
                    theta * 0.5 * (lo + hi)
                } else if w > 0.0 {
                    theta * hi + (-(-w).exp_m1() / w).ln()
                } else {
                    theta * lo + (w.exp_m1() / w).ln()
                }
            }
            Self::Gaussian { mean, sd } => theta * mean + 0.5 * theta * theta * sd * sd,
            Self::Exponential { rate } => {
                if theta < rate {
                    -(-theta / rate).ln_1p()
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Largest θ for which the cumulant generating function is finite (`+∞` if none).
    pub fn mgf_theta_limit(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => rate,
            _ => f64::INFINITY,
        }
    }
}

/// The law of the increment vector `X`: a scalar or a product of independent scalars.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    Scalar(ScalarFamily),
    Product(Vec<ScalarFamily>),
}

impl DistributionSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Scalar(_) => 1,
            Self::Product(c) => c.len(),
        }
    }

    pub fn components(&self) -> &[ScalarFamily] {
        match self {
            Self::Scalar(f) => std::slice::from_ref(f),
            Self::Product(c) => c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Product(c) = self {
            if c.is_empty() {
                return Err(Error::ParameterDomain("product-of-scalars with no components".into()));
            }
        }
        self.components().iter().try_for_each(ScalarFamily::validate)
    }

    /// Draws one increment into `out` (length `dim`).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (slot, fam) in out.iter_mut().zip(self.components()) {
            *slot = fam.sample(rng);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }
}

/// Exact moments of `X`, elementwise over its components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentProfile {
    pub mean: Vec<f64>,
    /// `E[(X-μ)^+]`
    pub pos_dev: Vec<f64>,
    /// `E[(X-μ)^-]`
    pub neg_dev: Vec<f64>,
    /// `E[|X-μ|^2]`
    pub variance: Vec<f64>,
    /// `E[|X-μ|^3]`; `+∞` marks an infinite third moment.
    pub abs_third: Vec<f64>,
    pub support_lo: Option<Vec<f64>>,
    pub support_hi: Option<Vec<f64>>,
    /// `(μ-a)(b-μ)/(b-a)`, zero on degenerate coordinates.
    pub bound_v: Option<Vec<f64>>,
    /// Components are mutually independent.
    pub independent: bool,
}

impl MomentProfile {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `E[||X-μ||_2^2]`.
    pub fn total_variance(&self) -> f64 {
        self.variance.iter().sum()
    }

    pub fn support(&self) -> Option<(&[f64], &[f64])> {
        match (&self.support_lo, &self.support_hi) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        }
    }

    pub fn third_moment_finite(&self) -> bool {
        self.abs_third.iter().all(|v| v.is_finite())
    }
}

/// Closed-form moments for `spec`.
pub fn analytic_moments(spec: &DistributionSpec) -> Result<MomentProfile> {
    spec.validate()?;
    let comps = spec.components();
    let col = |f: fn(&ScalarFamily) -> f64| comps.iter().map(f).collect::<Vec<_>>();
    let mean = col(ScalarFamily::mean);
    let half = col(ScalarFamily::abs_dev_half);
    let supports: Option<Vec<(f64, f64)>> = comps.iter().map(ScalarFamily::support).collect();
    let (support_lo, support_hi, bound_v) = match supports {
        Some(s) => {
            let lo: Vec<f64> = s.iter().map(|p| p.0).collect();
            let hi: Vec<f64> = s.iter().map(|p| p.1).collect();
            let v = s
                .iter()
                .zip(&mean)
                .map(|(&(a, b), &mu)| if b > a { (mu - a) * (b - mu) / (b - a) } else { 0.0 })
                .collect();
            (Some(lo), Some(hi), Some(v))
        }
        None => (None, None, None),
    };
    Ok(MomentProfile {
        mean,
        pos_dev: half.clone(),
        neg_dev: half,
        variance: col(ScalarFamily::variance),
        abs_third: col(ScalarFamily::abs_third),
        support_lo,
        support_hi,
        bound_v,
        independent: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn point_mass_is_degenerate() {
        let p = analytic_moments(&DistributionSpec::Scalar(ScalarFamily::PointMass { value: 0.5 })).unwrap();
        assert_eq!(p.mean, vec![0.5]);
        assert_eq!(p.pos_dev, vec![0.0]);
        assert_eq!(p.neg_dev, vec![0.0]);
        assert_eq!(p.variance, vec![0.0]);
        assert_eq!(p.bound_v, Some(vec![0.0]));
    }

    #[test]
    fn fair_bernoulli_moments() {
        let spec = DistributionSpec::Scalar(ScalarFamily::BernoulliAffine { x0: 0.0, x1: 1.0, p: 0.5 });
        let p = analytic_moments(&spec).unwrap();
        assert_eq!(p.mean, vec![0.5]);
        assert_eq!(p.pos_dev, vec![0.25]);
        assert_eq!(p.neg_dev, vec![0.25]);
        assert_eq!(p.variance, vec![0.25]);
        assert_eq!(p.bound_v, Some(vec![0.25]));
    }

    #[test]
    fn exponential_deviation_matches_quadrature() {
        let p = analytic_moments(&DistributionSpec::Scalar(ScalarFamily::Exponential { rate: 1.0 })).unwrap();
        // ∫_1^∞ (x-1) e^{-x} dx, truncated at 60 where the tail is below 1e-24
        let quad = simpson(|x| (x - 1.0) * (-x).exp(), 1.0, 60.0, 200_000);
        assert!((p.pos_dev[0] - quad).abs() < 1e-10, "{} vs {}", p.pos_dev[0], quad);
        assert!((p.pos_dev[0] - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(p.mean, vec![1.0]);
        assert_eq!(p.variance, vec![1.0]);
        let third = simpson(|x| (x - 1.0).abs().powi(3) * (-x).exp(), 0.0, 1.0, 20_000)
            + simpson(|x| (x - 1.0).powi(3) * (-x).exp(), 1.0, 80.0, 400_000);
        assert!((p.abs_third[0] - third).abs() < 1e-8);
    }

    #[test]
    fn uniform_and_gaussian_against_quadrature() {
        let u = ScalarFamily::Uniform { lo: -1.0, hi: 3.0 };
        let quad = simpson(|x| (x - 1.0).max(0.0) * 0.25, -1.0, 3.0, 4000);
        assert!((u.abs_dev_half() - quad).abs() < 1e-12);
        let g = ScalarFamily::Gaussian { mean: 0.3, sd: 2.0 };
        let dens = |x: f64| normal_pdf((x - 0.3) / 2.0) / 2.0;
        let quad = simpson(|x| (x - 0.3) * dens(x), 0.3, 40.0, 200_000);
        assert!((g.abs_dev_half() - quad).abs() < 1e-10);
        let quad3 = 2.0 * simpson(|x| (x - 0.3).powi(3) * dens(x), 0.3, 40.0, 200_000);
        assert!((g.abs_third() - quad3).abs() < 1e-9);
    }

    #[test]
    fn excess_and_positive_part_moments_against_quadrature() {
        let e = ScalarFamily::Exponential { rate: 1.5 };
        let dens = |x: f64| 1.5 * (-1.5 * x).exp();
        for &lam in &[-0.5f64, 0.0, 0.3, 2.0] {
            let lo = lam.max(0.0);
            let quad = simpson(|x| (x - lam) * dens(x), lo, 60.0, 200_000);
            assert!((e.excess_mean(lam) - quad).abs() < 1e-9, "λ={lam}");
        }
        for &(a, b) in &[(2.0, -1.0), (-1.0, 2.0), (0.5, 0.5), (-2.0, -1.0)] {
            let quad = simpson(|x| (a * x + b).max(0.0).powi(2) * dens(x), 0.0, 60.0, 400_000);
            assert!(
                (e.affine_pos_second_moment(a, b) - quad).abs() < 1e-6,
                "a={a} b={b}: {} vs {quad}",
                e.affine_pos_second_moment(a, b)
            );
        }
        let u = ScalarFamily::Uniform { lo: -1.0, hi: 2.0 };
        let quad = simpson(|x| (-2.0 * x + 1.0).max(0.0).powi(2) / 3.0, -1.0, 2.0, 30_000);
        assert!((u.affine_pos_second_moment(-2.0, 1.0) - quad).abs() < 1e-9);
        let g = ScalarFamily::Gaussian { mean: -0.2, sd: 1.3 };
        let gd = |x: f64| normal_pdf((x + 0.2) / 1.3) / 1.3;
        let quad = simpson(|x| (1.5 * x + 0.1).max(0.0).powi(2) * gd(x), -20.0, 20.0, 400_000);
        assert!((g.affine_pos_second_moment(1.5, 0.1) - quad).abs() < 1e-9);
    }

    #[test]
    fn log_mgf_matches_direct_expectation() {
        let b = ScalarFamily::BernoulliAffine { x0: -1.0, x1: 2.0, p: 0.3 };
        let direct = (0.7 * (-0.8f64).exp() + 0.3 * (1.6f64).exp()).ln();
        assert!((b.log_mgf(0.8) - direct).abs() < 1e-12);
        let u = ScalarFamily::Uniform { lo: 1.0, hi: 3.0 };
        let direct = (((3.0f64 * 0.7).exp() - (0.7f64).exp()) / (0.7 * 2.0)).ln();
        assert!((u.log_mgf(0.7) - direct).abs() < 1e-12);
        assert!((u.log_mgf(-0.7) - ((((-2.1f64).exp() - (-0.7f64).exp()) / (-1.4)).ln())).abs() < 1e-12);
        assert_eq!(ScalarFamily::Exponential { rate: 1.0 }.log_mgf(1.0), f64::INFINITY);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let bad = [
            ScalarFamily::BernoulliAffine { x0: 0.0, x1: 1.0, p: 1.5 },
            ScalarFamily::BernoulliAffine { x0: 1.0, x1: 0.0, p: 0.5 },
            ScalarFamily::Uniform { lo: 2.0, hi: 2.0 },
            ScalarFamily::Gaussian { mean: 0.0, sd: -1.0 },
            ScalarFamily::Exponential { rate: 0.0 },
        ];
        for f in bad {
            let r = analytic_moments(&DistributionSpec::Scalar(f.clone()));
            assert!(matches!(r, Err(Error::ParameterDomain(_))), "{f:?}");
        }
        assert!(analytic_moments(&DistributionSpec::Product(vec![])).is_err());
    }

    #[test]
    fn degenerate_draws() {
        let mut rng = stream(7, 0);
        let pm = DistributionSpec::Scalar(ScalarFamily::PointMass { value: 0.5 });
        let sure = DistributionSpec::Scalar(ScalarFamily::BernoulliAffine { x0: 0.0, x1: 1.0, p: 1.0 });
        for _ in 0..1000 {
            assert_eq!(pm.sample(&mut rng), vec![0.5]);
            assert_eq!(sure.sample(&mut rng), vec![1.0]);
        }
    }

    #[test]
    fn empirical_means_within_four_sigma() {
        let specs = [
            DistributionSpec::Scalar(ScalarFamily::BernoulliAffine { x0: 0.0, x1: 1.0, p: 0.5 }),
            DistributionSpec::Scalar(ScalarFamily::Uniform { lo: -1.0, hi: 2.0 }),
            DistributionSpec::Scalar(ScalarFamily::Gaussian { mean: 1.0, sd: 2.0 }),
            DistributionSpec::Product(vec![
                ScalarFamily::Exponential { rate: 2.0 },
                ScalarFamily::BernoulliAffine { x0: -1.0, x1: 1.0, p: 0.2 },
            ]),
        ];
        let draws = 1_000_000;
        for (i, spec) in specs.iter().enumerate() {
            let prof = analytic_moments(spec).unwrap();
            let mut rng = stream(2024, i as u64);
            let mut sums = vec![0.0; spec.dim()];
            let mut x = vec![0.0; spec.dim()];
            for _ in 0..draws {
                spec.sample_into(&mut rng, &mut x);
                for (s, v) in sums.iter_mut().zip(&x) {
                    *s += v;
                }
                if let (Some(lo), Some(hi)) = (&prof.support_lo, &prof.support_hi) {
                    for k in 0..x.len() {
                        assert!(lo[k] <= x[k] && x[k] <= hi[k]);
                    }
                }
            }
            for (k, sum) in sums.iter().enumerate() {
                let m = sum / draws as f64;
                let band = 4.0 * (prof.variance[k] / draws as f64).sqrt();
                assert!((m - prof.mean[k]).abs() <= band, "spec {i} comp {k}: {m}");
            }
        }
    }
}
