//! Warping factors `w(r) > 0` on `[a, b)` and their calculus.
//!
//! `Theta` is the antiderivative of `w` normalized by `Theta(a) = 0`. The
//! built-in families have closed forms for `Theta` and for `int_a^r w^n`;
//! custom factors supply `w, w', w''` as closures and are integrated by
//! adaptive quadrature.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

const CUSTOM_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Product,
    DeSitter,
    Gaussian,
    Custom,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Product => "product",
            Family::DeSitter => "de_sitter",
            Family::Gaussian => "gaussian",
            Family::Custom => "custom",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(Family::Product),
            "de_sitter" => Ok(Family::DeSitter),
            "gaussian" => Ok(Family::Gaussian),
            "custom" => Ok(Family::Custom),
            other => Err(Error::Invalid(format!("unknown warping family '{other}'"))),
        }
    }
}

type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;

/// A user-supplied smooth warping factor with analytic derivatives.
pub struct CustomWarping {
    pub value: Box<ScalarFn>,
    pub d1: Box<ScalarFn>,
    pub d2: Box<ScalarFn>,
}

#[derive(Clone)]
enum Kind {
    /// `w = c`
    Product { c: f64 },
    /// `w = s cosh(r / s)`
    DeSitter { s: f64 },
    /// `w = exp(-r^2 / (2 sigma^2))`
    /// `erf_a = erf(a / (sqrt 2 sigma))`, fixed by the interval.
    Gaussian { sigma: f64, erf_a: f64 },
    Custom(Arc<CustomWarping>),
}

/// `(w, w', w'', Theta)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpValues {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub integral: f64,
}

#[derive(Clone)]
pub struct WarpingFactor {
    kind: Kind,
    a: f64,
    b: f64,
}

impl fmt::Debug for WarpingFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WarpingFactor")
            .field("family", &self.family())
            .field("params", &self.params())
            .field("a", &self.a)
            .field("b", &self.b)
            .finish()
    }
}

impl WarpingFactor {
    /// Builds a built-in family. `params` may be empty (defaults: `c = 1`,
    /// `s = 1`, `sigma = 1`) or hold the single family parameter.
    pub fn new(family: Family, a: f64, b: f64, params: &[f64]) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Invalid(format!("warping interval requires a < b, got [{a}, {b})")));
        }
        if params.len() > 1 {
            return Err(Error::Invalid(format!(
                "{} takes at most one parameter, got {}",
                family.name(),
                params.len()
            )));
        }
        let p = params.first().copied().unwrap_or(1.0);
        if !(p.is_finite() && p > 0.0) {
            return Err(Error::Invalid(format!("{} parameter must be positive, got {p}", family.name())));
        }
        let kind = match family {
            Family::Product => Kind::Product { c: p },
            Family::DeSitter => Kind::DeSitter { s: p },
            Family::Gaussian => Kind::Gaussian { sigma: p, erf_a: libm::erf(a / (std::f64::consts::SQRT_2 * p)) },
            Family::Custom => {
                return Err(Error::Invalid(
                    "custom warping factors are built with WarpingFactor::custom".into(),
                ))
            }
        };
        Ok(Self { kind, a, b })
    }

    pub fn product(a: f64, b: f64) -> Self {
        Self::new(Family::Product, a, b, &[]).expect("valid interval")
    }

    pub fn de_sitter(a: f64, b: f64) -> Self {
        Self::new(Family::DeSitter, a, b, &[]).expect("valid interval")
    }

    pub fn gaussian(a: f64, b: f64) -> Self {
        Self::new(Family::Gaussian, a, b, &[]).expect("valid interval")
    }

    pub fn custom(a: f64, b: f64, custom: CustomWarping) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Invalid(format!("warping interval requires a < b, got [{a}, {b})")));
        }
        Ok(Self { kind: Kind::Custom(Arc::new(custom)), a, b })
    }

    pub fn family(&self) -> Family {
        match self.kind {
            Kind::Product { .. } => Family::Product,
            Kind::DeSitter { .. } => Family::DeSitter,
            Kind::Gaussian { .. } => Family::Gaussian,
            Kind::Custom(_) => Family::Custom,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self.kind {
            Kind::Product { c } => vec![c],
            Kind::DeSitter { s } => vec![s],
            Kind::Gaussian { sigma, .. } => vec![sigma],
            Kind::Custom(_) => vec![],
        }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.a && r < self.b
    }

    /// Evaluates `(w, w', w'', Theta)` at `r in [a, b)`.
    pub fn eval(&self, r: f64) -> Result<WarpValues> {
        if !self.contains(r) {
            return Err(Error::Domain { r, a: self.a, b: self.b });
        }
        let vals = self.eval_unchecked(r);
        if !(vals.value > 0.0) {
            return Err(Error::InvalidWarping { r, value: vals.value });
        }
        Ok(vals)
    }

    /// `w` alone, without range checks.
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        match &self.kind {
            Kind::Product { c } => *c,
            Kind::DeSitter { s } => s * (r / s).cosh(),
            Kind::Gaussian { sigma, .. } => (-0.5 * r * r / (sigma * sigma)).exp(),
            Kind::Custom(c) => (c.value)(r),
        }
    }

    /// `(w, w')` without range checks.
    #[inline]
    pub fn value_d1(&self, r: f64) -> (f64, f64) {
        match &self.kind {
            Kind::Product { c } => (*c, 0.0),
            Kind::DeSitter { s } => (s * (r / s).cosh(), (r / s).sinh()),
            Kind::Gaussian { sigma, .. } => {
                let w = (-0.5 * r * r / (sigma * sigma)).exp();
                (w, -r / (sigma * sigma) * w)
            }
            Kind::Custom(c) => ((c.value)(r), (c.d1)(r)),
        }
    }

    /// Evaluation without the interval and positivity checks; also valid at
    /// `r = b` for factors that extend smoothly there.
    #[inline]
    pub fn eval_unchecked(&self, r: f64) -> WarpValues {
        let a = self.a;
        match &self.kind {
            Kind::Product { c } => WarpValues { value: *c, d1: 0.0, d2: 0.0, integral: c * (r - a) },
            Kind::DeSitter { s } => {
                let x = r / s;
                WarpValues {
                    value: s * x.cosh(),
                    d1: x.sinh(),
                    d2: x.cosh() / s,
                    integral: s * s * (x.sinh() - (a / s).sinh()),
                }
            }
            Kind::Gaussian { sigma, erf_a } => {
                let s2 = sigma * sigma;
                let w = (-0.5 * r * r / s2).exp();
                let k = sigma * std::f64::consts::FRAC_PI_2.sqrt();
                let z = std::f64::consts::SQRT_2 * sigma;
                WarpValues {
                    value: w,
                    d1: -r / s2 * w,
                    d2: (r * r / s2 - 1.0) / s2 * w,
                    integral: k * (libm::erf(r / z) - erf_a),
                }
            }
            Kind::Custom(c) => WarpValues {
                value: (c.value)(r),
                d1: (c.d1)(r),
                d2: (c.d2)(r),
                integral: quad::integrate(|s| (c.value)(s), a, r, CUSTOM_REL_TOL),
            },
        }
    }

    /// `Theta(r) = int_a^r w`.
    #[inline]
    pub fn antiderivative(&self, r: f64) -> f64 {
        self.eval_unchecked(r).integral
    }

    /// `int_a^r w(s)^n ds`, the volume density of a column over a unit fiber
    /// element. Closed form where available, adaptive quadrature otherwise.
    pub fn power_integral(&self, n: usize, r: f64) -> f64 {
        let a = self.a;
        match (&self.kind, n) {
            (_, 0) => r - a,
            (Kind::Product { c }, _) => c.powi(n as i32) * (r - a),
            (Kind::DeSitter { .. }, 1) => self.eval_unchecked(r).integral,
            (Kind::DeSitter { s }, 2) => {
                let prim = |x: f64| s * s * (0.5 * x + 0.25 * s * (2.0 * x / s).sinh());
                prim(r) - prim(a)
            }
            (Kind::Gaussian { sigma, .. }, _) => {
                let nf = n as f64;
                let k = sigma * (std::f64::consts::PI / (2.0 * nf)).sqrt();
                let z = std::f64::consts::SQRT_2 * sigma / nf.sqrt();
                k * (libm::erf(r / z) - libm::erf(a / z))
            }
            _ => quad::integrate(|s| self.value(s).powi(n as i32), a, r, CUSTOM_REL_TOL),
        }
    }

    /// NCC margin `mu(r) = lambda_hat - (n - 1)(w w'' - w'^2)`. On a fiber with
    /// `Ric_hat = lambda_hat g_hat` this equals `w^2 Ric(K, K)` for the null
    /// vector `K = d_r + e / w` (`e` a unit fiber vector), so `mu >= 0` is the
    /// null convergence condition and `mu > 0` its strict form.
    pub fn ncc_margin(&self, r: f64, lambda_hat: f64, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::Invalid("fiber dimension must be at least 1".into()));
        }
        let v = self.eval(r)?;
        Ok(ncc_margin_from(&v, lambda_hat, n))
    }

    /// Smallest NCC margin over `samples` equispaced points of `[a, b)`.
    pub fn min_ncc_margin(&self, lambda_hat: f64, n: usize, samples: usize) -> Result<f64> {
        let samples = samples.max(2);
        let h = (self.b - self.a) / samples as f64;
        let mut worst = f64::INFINITY;
        for k in 0..samples {
            worst = worst.min(self.ncc_margin(self.a + h * k as f64, lambda_hat, n)?);
        }
        Ok(worst)
    }
}

#[inline]
pub fn ncc_margin_from(v: &WarpValues, lambda_hat: f64, n: usize) -> f64 {
    lambda_hat - (n as f64 - 1.0) * (v.value * v.d2 - v.d1 * v.d1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn product_values() {
        let w = WarpingFactor::product(0.0, 2.0);
        let v = w.eval(0.7).unwrap();
        assert_eq!((v.value, v.d1, v.d2), (1.0, 0.0, 0.0));
        assert_abs_diff_eq!(v.integral, 0.7, epsilon = 1e-15);
    }

    #[test]
    fn de_sitter_values() {
        let w = WarpingFactor::de_sitter(-1.0, 2.0);
        let v = w.eval(0.0).unwrap();
        assert_eq!((v.value, v.d1, v.d2), (1.0, 0.0, 1.0));
        assert_abs_diff_eq!(v.integral, 0.0 - (-1f64).sinh(), epsilon = 1e-15);
    }

    #[test]
    fn out_of_interval_is_domain_error() {
        let w = WarpingFactor::gaussian(-1.0, 1.0);
        assert!(matches!(w.eval(1.0), Err(Error::Domain { .. })));
        assert!(matches!(w.eval(-1.5), Err(Error::Domain { .. })));
        assert!(w.eval(-1.0).is_ok());
    }

    #[test]
    fn nonpositive_custom_factor_is_rejected() {
        let w = WarpingFactor::custom(
            0.0,
            2.0,
            CustomWarping {
                value: Box::new(|r| 1.0 - r),
                d1: Box::new(|_| -1.0),
                d2: Box::new(|_| 0.0),
            },
        )
        .unwrap();
        assert!(w.eval(0.5).is_ok());
        assert!(matches!(w.eval(1.5), Err(Error::InvalidWarping { .. })));
    }

    #[test]
    fn custom_antiderivative_by_quadrature() {
        let w = WarpingFactor::custom(
            0.0,
            3.0,
            CustomWarping {
                value: Box::new(|r| 2.0 + r.sin()),
                d1: Box::new(|r| r.cos()),
                d2: Box::new(|r| -r.sin()),
            },
        )
        .unwrap();
        let v = w.eval(2.5).unwrap();
        let exact = 5.0 + 1.0 - 2.5f64.cos();
        assert!((v.integral - exact).abs() <= 1e-10 * exact);
        let p2 = w.power_integral(2, 2.5);
        // int (2 + sin)^2 = 4r - 4cos r + r/2 - sin(2r)/4
        let prim = |r: f64| 4.5 * r - 4.0 * r.cos() - (2.0 * r).sin() / 4.0;
        assert!((p2 - (prim(2.5) - prim(0.0))).abs() < 1e-9);
    }

    #[test]
    fn ncc_margins_of_builtin_families() {
        let p = WarpingFactor::product(-1.0, 1.0);
        assert_eq!(p.ncc_margin(0.3, 0.0, 2).unwrap(), 0.0);
        let d = WarpingFactor::de_sitter(-1.0, 1.0);
        assert_abs_diff_eq!(d.ncc_margin(0.3, 1.0, 2).unwrap(), 0.0, epsilon = 1e-14);
        let g = WarpingFactor::gaussian(-1.0, 1.0);
        assert_abs_diff_eq!(g.ncc_margin(0.0, 0.0, 2).unwrap(), 1.0, epsilon = 1e-15);
        // cosh over a flat fiber violates the condition
        assert!(d.min_ncc_margin(0.0, 2, 50).unwrap() < 0.0);
    }

    #[test]
    fn power_integrals_match_quadrature() {
        for w in [
            WarpingFactor::product(-1.0, 2.0),
            WarpingFactor::de_sitter(-1.0, 2.0),
            WarpingFactor::gaussian(-1.0, 2.0),
            WarpingFactor::new(Family::DeSitter, -1.0, 2.0, &[1.7]).unwrap(),
            WarpingFactor::new(Family::Gaussian, -1.0, 2.0, &[0.6]).unwrap(),
        ] {
            for n in 1..=3 {
                let r = 1.3;
                let q = quad::integrate(|s| w.value(s).powi(n as i32), -1.0, r, 1e-13);
                assert!((w.power_integral(n, r) - q).abs() < 1e-12 * q.abs().max(1.0), "{w:?} n={n}");
            }
        }
    }
}
