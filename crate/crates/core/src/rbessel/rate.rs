use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Result};

/// Fragmentation rate `R(g)` as a function of the gap `g > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateFunction {
    /// `λ/g²`; unbounded, only simulable through [`RateFunction::truncate`].
    PowerLaw { lambda: f64 },
    /// `min(λ/g², n)`.
    TruncatedPowerLaw { lambda: f64, n: f64 },
    Constant { r0: f64 },
    /// `min(λ/g², λ/2)`: the cap binds exactly at `√2·x = √2`, i.e. `x = 1`.
    HalfLambdaTrunc { lambda: f64 },
    /// Step function: `R(g) = rate_i` for the first breakpoint with
    /// `g ≤ g_i`, zero past the last breakpoint. Breakpoints must have
    /// strictly increasing `g` and nonincreasing rates.
    Table { breakpoints: Vec<(f64, f64)> },
}

/// Classification by the behaviour of `g²R(g)` as `g ↓ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuadraticClass {
    /// `liminf g²R(g) > 6`.
    Upper,
    /// `R(g) = 6/g²`.
    Critical,
    /// `limsup g²R(g) < 6`; every bounded rate falls here.
    Lower,
}

impl RateFunction {
    pub fn power_law(lambda: f64) -> Self {
        Self::PowerLaw { lambda }
    }

    pub fn truncated(lambda: f64, n: f64) -> Self {
        Self::TruncatedPowerLaw { lambda, n }
    }

    pub fn constant(r0: f64) -> Self {
        Self::Constant { r0 }
    }

    pub fn half_lambda(lambda: f64) -> Self {
        Self::HalfLambdaTrunc { lambda }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64, what: &str| {
            ensure(v >= 0.0 && v.is_finite(), || {
                format!("{what} must be a finite nonnegative number, got {v}")
            })
        };
        match self {
            Self::PowerLaw { lambda } | Self::HalfLambdaTrunc { lambda } => nonneg(*lambda, "lambda"),
            Self::TruncatedPowerLaw { lambda, n } => {
                nonneg(*lambda, "lambda")?;
                ensure(*n > 0.0 && n.is_finite(), || {
                    format!("truncation level must be positive, got {n}")
                })
            }
            Self::Constant { r0 } => nonneg(*r0, "constant rate"),
            Self::Table { breakpoints } => {
                ensure(!breakpoints.is_empty(), || "rate table is empty".into())?;
                for &(g, r) in breakpoints {
                    ensure(g > 0.0 && g.is_finite(), || format!("table gap {g} must be positive"))?;
                    nonneg(r, "table rate")?;
                }
                ensure(
                    breakpoints.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 >= w[1].1),
                    || "rate table must have increasing gaps and nonincreasing rates".into(),
                )
            }
        }
    }

    /// `R(g)`; `g = 0` evaluates to the supremum.
    #[inline]
    pub fn eval(&self, g: f64) -> f64 {
        match *self {
            Self::PowerLaw { lambda } => {
                if g <= 0.0 {
                    f64::INFINITY
                } else {
                    lambda / (g * g)
                }
            }
            Self::TruncatedPowerLaw { lambda, n } => {
                if g <= 0.0 {
                    n
                } else {
                    (lambda / (g * g)).min(n)
                }
            }
            Self::Constant { r0 } => r0,
            Self::HalfLambdaTrunc { lambda } => {
                if g <= 0.0 {
                    0.5 * lambda
                } else {
                    (lambda / (g * g)).min(0.5 * lambda)
                }
            }
            Self::Table { ref breakpoints } => breakpoints
                .iter()
                .find(|(gi, _)| g <= *gi)
                .map_or(0.0, |&(_, r)| r),
        }
    }

    /// `sup R`, or `None` when unbounded.
    pub fn bound(&self) -> Option<f64> {
        match *self {
            Self::PowerLaw { lambda } => {
                if lambda == 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
            Self::TruncatedPowerLaw { lambda, n } => Some(if lambda == 0.0 { 0.0 } else { n }),
            Self::Constant { r0 } => Some(r0),
            Self::HalfLambdaTrunc { lambda } => Some(0.5 * lambda),
            Self::Table { ref breakpoints } => {
                Some(breakpoints.iter().map(|&(_, r)| r).fold(0.0, f64::max))
            }
        }
    }

    /// The thinning bound, or an error asking the caller to truncate first.
    pub fn require_bound(&self) -> Result<f64> {
        self.validate()?;
        match self.bound() {
            Some(m) => Ok(m),
            None => invalid(format!("rate {self} is unbounded; truncate it first")),
        }
    }

    /// `R ∧ n`.
    pub fn truncate(&self, n: f64) -> Self {
        match *self {
            Self::PowerLaw { lambda } => Self::TruncatedPowerLaw { lambda, n },
            Self::TruncatedPowerLaw { lambda, n: m } => Self::TruncatedPowerLaw {
                lambda,
                n: m.min(n),
            },
            Self::Constant { r0 } => Self::Constant { r0: r0.min(n) },
            Self::HalfLambdaTrunc { lambda } => {
                if n < 0.5 * lambda {
                    Self::TruncatedPowerLaw { lambda, n }
                } else {
                    self.clone()
                }
            }
            Self::Table { ref breakpoints } => Self::Table {
                breakpoints: breakpoints.iter().map(|&(g, r)| (g, r.min(n))).collect(),
            },
        }
    }

    /// λ of the underlying power law, when there is one.
    pub fn lambda(&self) -> Option<f64> {
        match *self {
            Self::PowerLaw { lambda }
            | Self::TruncatedPowerLaw { lambda, .. }
            | Self::HalfLambdaTrunc { lambda } => Some(lambda),
            _ => None,
        }
    }

    pub fn quadratic_class(&self) -> QuadraticClass {
        match *self {
            Self::PowerLaw { lambda } if lambda > 6.0 => QuadraticClass::Upper,
            Self::PowerLaw { lambda: 6.0 } => QuadraticClass::Critical,
            _ => QuadraticClass::Lower,
        }
    }
}

impl fmt::Display for RateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerLaw { lambda } => write!(f, "power_law(lambda={lambda})"),
            Self::TruncatedPowerLaw { lambda, n } => {
                write!(f, "truncated_power_law(lambda={lambda},n={n})")
            }
            Self::Constant { r0 } => write!(f, "constant(r0={r0})"),
            Self::HalfLambdaTrunc { lambda } => write!(f, "half_lambda_trunc(lambda={lambda})"),
            Self::Table { breakpoints } => {
                write!(f, "table(")?;
                for (i, (g, r)) in breakpoints.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{g}:{r}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn half_lambda_switches_at_unit_height() {
        let r = RateFunction::half_lambda(3.0);
        let s2 = std::f64::consts::SQRT_2;
        assert_eq!(r.eval(s2 * 0.5), 1.5);
        assert!((r.eval(s2 * 2.0) - 1.5 / 4.0).abs() < 1e-15);
        assert_eq!(r.bound(), Some(1.5));
    }

    #[test]
    fn bounds_and_truncation() {
        let p = RateFunction::power_law(3.0);
        assert!(p.bound().is_none());
        assert!(p.require_bound().is_err());
        let t = p.truncate(64.0);
        assert_eq!(t, RateFunction::truncated(3.0, 64.0));
        assert_eq!(t.bound(), Some(64.0));
        assert_eq!(t.truncate(16.0), RateFunction::truncated(3.0, 16.0));
        assert_eq!(RateFunction::constant(5.0).truncate(2.0), RateFunction::constant(2.0));
        assert_eq!(RateFunction::half_lambda(8.0).truncate(2.0), RateFunction::truncated(8.0, 2.0));
    }

    #[test]
    fn table_rates() {
        let t = RateFunction::Table {
            breakpoints: vec![(0.1, 10.0), (1.0, 2.0)],
        };
        t.validate().unwrap();
        assert_eq!(t.eval(0.05), 10.0);
        assert_eq!(t.eval(0.5), 2.0);
        assert_eq!(t.eval(2.0), 0.0);
        assert_eq!(t.bound(), Some(10.0));
        let bad = RateFunction::Table {
            breakpoints: vec![(1.0, 1.0), (0.5, 2.0)],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn classification() {
        assert_eq!(RateFunction::power_law(8.0).quadratic_class(), QuadraticClass::Upper);
        assert_eq!(RateFunction::power_law(6.0).quadratic_class(), QuadraticClass::Critical);
        assert_eq!(RateFunction::power_law(3.0).quadratic_class(), QuadraticClass::Lower);
        assert_eq!(RateFunction::truncated(8.0, 64.0).quadratic_class(), QuadraticClass::Lower);
    }

    proptest! {
        #[test]
        fn truncated_power_law_monotonicity(
            lambda in 0.1f64..20.0, g in 1e-3f64..10.0, dg in 0.0f64..5.0,
            n in 1.0f64..1e4, dn in 0.0f64..1e4,
        ) {
            let r = RateFunction::truncated(lambda, n);
            prop_assert!(r.eval(g + dg) <= r.eval(g));
            prop_assert!(RateFunction::truncated(lambda, n + dn).eval(g) >= r.eval(g));
            prop_assert!(r.eval(g) <= r.bound().unwrap());
            prop_assert!(r.eval(g).is_finite() && r.eval(g) >= 0.0);
        }
    }
}
