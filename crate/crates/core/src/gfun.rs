//! Scalar functions `g(θ)` used by sample-mean stopping rules and validators.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GFun {
    Constant {
        c: f64,
    },
    /// `intercept + slope·θ`
    Linear {
        intercept: f64,
        slope: f64,
    },
    /// `c·√θ` on `θ ≥ 0`, `-∞` below.
    Sqrt {
        c: f64,
    },
    /// `min(slope·θ, cap)`
    Capped {
        slope: f64,
        cap: f64,
    },
    /// `c0 + c·θ(1-θ)`
    VarianceProxy {
        c0: f64,
        c: f64,
    },
    /// `(c/θ)^p` on `θ > 0`, `+∞` at and below zero.
    InversePower {
        c: f64,
        p: f64,
    },
    /// `a2·θ² + a1·θ + a0`
    Quadratic {
        a2: f64,
        a1: f64,
        a0: f64,
    },
    /// `c·|θ|`
    Abs {
        c: f64,
    },
}

impl GFun {
    pub fn reciprocal(c: f64) -> Self {
        Self::InversePower { c, p: 1.0 }
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Self::Constant { c } => c,
            Self::Linear { intercept, slope } => intercept + slope * x,
            Self::Sqrt { c } => {
                if x >= 0.0 {
                    c * x.sqrt()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::Capped { slope, cap } => (slope * x).min(cap),
            Self::VarianceProxy { c0, c } => c0 + c * x * (1.0 - x),
            Self::InversePower { c, p } => {
                if x > 0.0 {
                    (c / x).powf(p)
                } else {
                    f64::INFINITY
                }
            }
            Self::Quadratic { a2, a1, a0 } => (a2 * x + a1) * x + a0,
            Self::Abs { c } => c * x.abs(),
        }
    }

    /// Derivative, where it exists.
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Constant { .. } => 0.0,
            Self::Linear { slope, .. } => slope,
            Self::Sqrt { c } => 0.5 * c / x.sqrt(),
            Self::Capped { slope, cap } => {
                if slope * x < cap {
                    slope
                } else {
                    0.0
                }
            }
            Self::VarianceProxy { c, .. } => c * (1.0 - 2.0 * x),
            Self::InversePower { c, p } => -p * (c / x).powf(p) / x,
            Self::Quadratic { a2, a1, .. } => 2.0 * a2 * x + a1,
            Self::Abs { c } => c * x.signum(),
        }
    }

    pub fn is_concave(&self) -> bool {
        match *self {
            Self::Constant { .. } | Self::Linear { .. } | Self::Capped { .. } => true,
            Self::Sqrt { c } => c >= 0.0,
            Self::VarianceProxy { c, .. } => c >= 0.0,
            Self::InversePower { c, .. } => c == 0.0,
            Self::Quadratic { a2, .. } => a2 <= 0.0,
            Self::Abs { c } => c <= 0.0,
        }
    }

    pub fn is_convex(&self) -> bool {
        match *self {
            Self::Constant { .. } | Self::Linear { .. } => true,
            Self::Sqrt { c } => c == 0.0,
            Self::Capped { .. } => false,
            Self::VarianceProxy { c, .. } => c <= 0.0,
            Self::InversePower { c, p } => c >= 0.0 && p >= 0.0,
            Self::Quadratic { a2, .. } => a2 >= 0.0,
            Self::Abs { c } => c >= 0.0,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Constant { c } => format!("{c}"),
            Self::Linear { intercept, slope } => format!("{intercept}+{slope}θ"),
            Self::Sqrt { c } => format!("{c}√θ"),
            Self::Capped { slope, cap } => format!("min({slope}θ,{cap})"),
            Self::VarianceProxy { c0, c } => format!("{c0}+{c}θ(1-θ)"),
            Self::InversePower { c, p } => format!("({c}/θ)^{p}"),
            Self::Quadratic { a2, a1, a0 } => format!("{a2}θ²+{a1}θ+{a0}"),
            Self::Abs { c } => format!("{c}|θ|"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_central_differences() {
        let fs = [
            GFun::Linear { intercept: 1.0, slope: -2.0 },
            GFun::Sqrt { c: 3.0 },
            GFun::VarianceProxy { c0: 20.0, c: 100.0 },
            GFun::reciprocal(5.0),
            GFun::InversePower { c: 2.0, p: 2.0 },
            GFun::Quadratic { a2: -1.0, a1: 0.5, a0: 2.0 },
        ];
        for f in fs {
            for &x in &[0.3, 0.7, 1.4] {
                let h = 1e-6;
                let num = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
                assert!((num - f.derivative(x)).abs() < 1e-5 * (1.0 + num.abs()), "{f:?} at {x}");
            }
        }
    }

    #[test]
    fn shape_flags_match_midpoint_checks() {
        let fs = [
            GFun::Sqrt { c: 1.0 },
            GFun::Capped { slope: 1.0, cap: 1.0 },
            GFun::VarianceProxy { c0: 0.0, c: 4.0 },
            GFun::reciprocal(5.0),
            GFun::Quadratic { a2: 1.0, a1: 0.0, a0: 0.0 },
            GFun::Quadratic { a2: -1.0, a1: 0.0, a0: 0.0 },
            GFun::Abs { c: 1.0 },
        ];
        let pts: Vec<f64> = (1..40).map(|i| i as f64 * 0.05).collect();
        for f in fs {
            let mut concave = true;
            let mut convex = true;
            for &x in &pts {
                for &y in &pts {
                    let mid = f.value(0.5 * (x + y));
                    let avg = 0.5 * (f.value(x) + f.value(y));
                    concave &= mid >= avg - 1e-12;
                    convex &= mid <= avg + 1e-12;
                }
            }
            if f.is_concave() {
                assert!(concave, "{f:?}");
            }
            if f.is_convex() {
                assert!(convex, "{f:?}");
            }
        }
    }
}
