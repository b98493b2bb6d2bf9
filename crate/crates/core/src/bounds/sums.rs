//! Laws of partial sums `Y = Z_1 + ... + Z_n` of i.i.d. scalars, and expectations
//! over a scalar threshold law.

use statrs::function::factorial::{binomial, factorial, ln_binomial};
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::moments::{normal_cdf, normal_pdf, ScalarFamily};

/// Irwin–Hall alternating sums lose precision beyond this many terms.
pub const IRWIN_HALL_MAX: u64 = 20;

#[derive(Debug, Clone, PartialEq)]
pub enum SumLaw {
    Point(f64),
    /// Mass `pmf[j]` at `base + j·step`.
    Lattice {
        base: f64,
        step: f64,
        pmf: Vec<f64>,
    },
    Gamma {
        shape: f64,
        rate: f64,
    },
    Gaussian {
        mean: f64,
        sd: f64,
    },
    /// `n·lo + width·U` with `U` a sum of `n` standard uniforms.
    IrwinHall {
        n: u64,
        lo: f64,
        width: f64,
    },
}

impl SumLaw {
    /// The exact law of the `n`-fold sum, if it has a usable closed form.
    pub fn of(fam: &ScalarFamily, n: u64) -> Option<Self> {
        let nf = n as f64;
        Some(match *fam {
            ScalarFamily::PointMass { value } => Self::Point(nf * value),
            ScalarFamily::BernoulliAffine { x0, x1, p } => {
                let pmf = (0..=n)
                    .map(|j| {
                        let lp = ln_binomial(n, j) + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln();
                        if p == 0.0 {
                            f64::from(j == 0)
                        } else if p == 1.0 {
                            f64::from(j == n)
                        } else {
                            lp.exp()
                        }
                    })
                    .collect();
                Self::Lattice { base: nf * x0, step: x1 - x0, pmf }
            }
            ScalarFamily::Exponential { rate } => Self::Gamma { shape: nf, rate },
            ScalarFamily::Gaussian { mean, sd } => Self::Gaussian { mean: nf * mean, sd: nf.sqrt() * sd },
            ScalarFamily::Uniform { lo, hi } if n <= IRWIN_HALL_MAX => Self::IrwinHall { n, lo, width: hi - lo },
            ScalarFamily::Uniform { .. } => return None,
        })
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Point(v) => *v,
            Self::Lattice { base, step, pmf } => {
                base + step * pmf.iter().enumerate().map(|(j, w)| j as f64 * w).sum::<f64>()
            }
            Self::Gamma { shape, rate } => shape / rate,
            Self::Gaussian { mean, .. } => *mean,
            Self::IrwinHall { n, lo, width } => *n as f64 * (lo + 0.5 * width),
        }
    }

    /// `Pr{Y < x}`.
    pub fn prob_below(&self, x: f64) -> f64 {
        match self {
            Self::Point(v) => f64::from(*v < x),
            Self::Lattice { base, step, pmf } => {
                pmf.iter().enumerate().filter(|(j, _)| base + *j as f64 * step < x).map(|(_, w)| w).sum()
            }
            Self::Gamma { shape, rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(*shape, rate * x)
                }
            }
            Self::Gaussian { mean, sd } => {
                if *sd == 0.0 {
                    f64::from(*mean < x)
                } else {
                    normal_cdf((x - mean) / sd)
                }
            }
            Self::IrwinHall { n, lo, width } => irwin_hall_cdf(*n, (x - *n as f64 * lo) / width),
        }
    }

    /// `E[(Y - x)^+]`.
    pub fn excess_mean(&self, x: f64) -> f64 {
        match self {
            Self::Point(v) => (v - x).max(0.0),
            Self::Lattice { base, step, pmf } => {
                pmf.iter().enumerate().map(|(j, w)| w * (base + j as f64 * step - x).max(0.0)).sum()
            }
            Self::Gamma { shape, rate } => {
                if x <= 0.0 {
                    shape / rate - x
                } else {
                    let y = rate * x;
                    shape / rate * gamma_ur(shape + 1.0, y) - x * gamma_ur(*shape, y)
                }
            }
            Self::Gaussian { mean, sd } => {
                if *sd == 0.0 {
                    (mean - x).max(0.0)
                } else {
                    let z = (x - mean) / sd;
                    sd * normal_pdf(z) + (mean - x) * normal_cdf(-z)
                }
            }
            Self::IrwinHall { n, lo, width } => {
                let nf = *n as f64;
                let u = (x - nf * lo) / width;
                let tail = if u <= 0.0 {
                    0.5 * nf - u
                } else if u >= nf {
                    0.0
                } else {
                    0.5 * nf - u + irwin_hall_cdf_integral(*n, u)
                };
                width * tail.max(0.0)
            }
        }
    }

    /// `E[h(Y)]`; exact on atoms, composite Simpson on densities.
    pub fn expect(&self, h: &dyn Fn(f64) -> f64) -> f64 {
        match self {
            Self::Point(v) => h(*v),
            Self::Lattice { base, step, pmf } => {
                pmf.iter().enumerate().map(|(j, w)| if *w > 0.0 { w * h(base + j as f64 * step) } else { 0.0 }).sum()
            }
            Self::Gamma { shape, rate } => {
                let (k, r) = (*shape, *rate);
                let norm = k * r.ln() - ln_gamma(k);
                let dens = |y: f64| {
                    if y <= 0.0 {
                        if k == 1.0 {
                            r
                        } else {
                            0.0
                        }
                    } else {
                        (norm + (k - 1.0) * y.ln() - r * y).exp()
                    }
                };
                let hi = (k + 40.0 * k.sqrt() + 40.0) / r;
                simpson(&|y| dens(y) * h(y), 0.0, hi, 20_000)
            }
            Self::Gaussian { mean, sd } => {
                if *sd == 0.0 {
                    return h(*mean);
                }
                simpson(&|z| normal_pdf(z) * h(mean + sd * z), -12.0, 12.0, 20_000)
            }
            Self::IrwinHall { n, lo, width } => {
                let nf = *n as f64;
                // the density is a polynomial on each unit interval
                (0..*n)
                    .map(|k| {
                        simpson(&|u| irwin_hall_density(*n, u) * h(nf * lo + width * u), k as f64, k as f64 + 1.0, 400)
                    })
                    .sum()
            }
        }
    }
}

fn irwin_hall_terms(n: u64, u: f64, power: i32) -> f64 {
    let top = (u.floor() as u64).min(n);
    (0..=top)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(n, k) * (u - k as f64).powi(power)
        })
        .sum()
}

fn irwin_hall_cdf(n: u64, u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= n as f64 {
        1.0
    } else {
        (irwin_hall_terms(n, u, n as i32) / factorial(n)).clamp(0.0, 1.0)
    }
}

/// `∫_0^u F(s) ds` for the Irwin–Hall CDF `F`.
fn irwin_hall_cdf_integral(n: u64, u: f64) -> f64 {
    irwin_hall_terms(n, u, n as i32 + 1) / factorial(n + 1)
}

fn irwin_hall_density(n: u64, u: f64) -> f64 {
    if u < 0.0 || u > n as f64 {
        0.0
    } else if n == 1 {
        1.0
    } else {
        (irwin_hall_terms(n, u, n as i32 - 1) / factorial(n - 1)).max(0.0)
    }
}

/// Composite Simpson rule with `intervals` (rounded up to even) panels.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `E[f(λ)]` for a threshold law; the flag is set when quadrature was needed.
pub fn expect_over(law: &ScalarFamily, f: &dyn Fn(f64) -> f64) -> (f64, bool) {
    match *law {
        ScalarFamily::PointMass { value } => (f(value), false),
        ScalarFamily::BernoulliAffine { x0, x1, p } => ((1.0 - p) * f(x0) + p * f(x1), false),
        ScalarFamily::Uniform { lo, hi } => (simpson(f, lo, hi, 20_000) / (hi - lo), true),
        ScalarFamily::Exponential { rate } => {
            (simpson(&|x| rate * (-rate * x).exp() * f(x), 0.0, 50.0 / rate, 40_000), true)
        }
        ScalarFamily::Gaussian { mean, sd } => {
            if sd == 0.0 {
                (f(mean), false)
            } else {
                (simpson(&|z| normal_pdf(z) * f(mean + sd * z), -12.0, 12.0, 40_000), true)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::aux_stream;

    #[test]
    fn single_term_laws_match_the_family() {
        let fams = [
            ScalarFamily::PointMass { value: 0.7 },
            ScalarFamily::BernoulliAffine { x0: -1.0, x1: 2.0, p: 0.3 },
            ScalarFamily::Uniform { lo: 0.5, hi: 2.0 },
            ScalarFamily::Gaussian { mean: 0.2, sd: 1.5 },
            ScalarFamily::Exponential { rate: 2.0 },
        ];
        for fam in &fams {
            let law = SumLaw::of(fam, 1).unwrap();
            assert!((law.mean() - fam.mean()).abs() < 1e-12);
            for x in [-1.0, 0.1, 0.9, 1.7, 3.0] {
                assert!((law.prob_below(x) - fam.prob_below(x)).abs() < 1e-9, "{fam:?} {x}");
                assert!((law.excess_mean(x) - fam.excess_mean(x)).abs() < 1e-9, "{fam:?} {x}");
            }
            let m2 = law.expect(&|y| y * y);
            assert!((m2 - fam.second_moment()).abs() < 1e-6 * (1.0 + m2), "{fam:?}: {m2}");
        }
    }

    #[test]
    fn sums_agree_with_simulation() {
        let fams = [
            ScalarFamily::BernoulliAffine { x0: 0.0, x1: 1.0, p: 0.4 },
            ScalarFamily::Uniform { lo: 0.0, hi: 1.0 },
            ScalarFamily::Exponential { rate: 1.0 },
        ];
        let mut rng = aux_stream(3, 0);
        for fam in &fams {
            for n in [2u64, 3, 7] {
                let law = SumLaw::of(fam, n).unwrap();
                let draws = 200_000;
                let x = 0.8 * n as f64 * fam.mean();
                let (mut below, mut excess) = (0.0, 0.0);
                for _ in 0..draws {
                    let y: f64 = (0..n).map(|_| fam.sample(&mut rng)).sum();
                    below += f64::from(y < x);
                    excess += (y - x).max(0.0);
                }
                let (pb, ex) = (below / draws as f64, excess / draws as f64);
                assert!((law.prob_below(x) - pb).abs() < 0.006, "{fam:?} n={n}: {} vs {pb}", law.prob_below(x));
                assert!((law.excess_mean(x) - ex).abs() < 0.01 * (1.0 + ex), "{fam:?} n={n}");
                assert!((law.mean() - n as f64 * fam.mean()).abs() < 1e-9);
                let total = law.expect(&|_| 1.0);
                assert!((total - 1.0).abs() < 1e-6, "{fam:?} n={n}: mass {total}");
            }
        }
    }

    #[test]
    fn threshold_expectations() {
        let (v, quad) = expect_over(&ScalarFamily::Uniform { lo: 0.0, hi: 2.0 }, &|x| x * x);
        assert!(quad);
        assert!((v - 4.0 / 3.0).abs() < 1e-10);
        let (v, quad) = expect_over(&ScalarFamily::PointMass { value: 3.0 }, &|x| x + 1.0);
        assert!(!quad);
        assert_eq!(v, 4.0);
    }
}
