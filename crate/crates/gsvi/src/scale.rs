//! The scale function φ mapping ATM total variance `u = θ_t` to the moneyness
//! rescaling in `w(k, t) = θ_t · Ψ(k·φ(θ_t))`.
//!
//! The elasticity `f(u) = u·φ'(u)/φ(u)` and the product `u·φ(u)` carry all the
//! no-arbitrage information this crate needs from φ; families declare their
//! analytic limits (`φ(0⁺)`, `M_∞ = lim u·φ(u)`, wing values of `f`) so grid
//! scans can be refined with exact endpoint data.

use std::sync::Arc;

use crate::error::{GsviError, Result};

type ScaleFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum ScaleKind {
    /// `φ(u) = α·(1 − e^{-u})/u`; `u·φ(u)` increases to `M_∞ = α`.
    Decay { alpha: f64 },
    /// `φ(u) = s·u^{-γ}`; constant elasticity `f ≡ -γ`.
    Power { scale: f64, exponent: f64 },
    /// `φ ≡ level`; `f ≡ 0`.
    Constant { level: f64 },
    Custom {
        value: ScaleFn,
        deriv: Option<ScaleFn>,
    },
}

/// Scale curve φ with derivative access and declared analytic limits.
#[derive(Clone)]
pub struct ScaleCurve {
    kind: ScaleKind,
    limit_at_zero: Option<f64>,
    m_infinity: Option<f64>,
    elasticity_at_zero: Option<f64>,
    elasticity_at_infinity: Option<f64>,
}

impl std::fmt::Debug for ScaleCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match &self.kind {
            ScaleKind::Decay { alpha } => format!("decay(alpha={alpha})"),
            ScaleKind::Power { scale, exponent } => format!("power({scale}·u^-{exponent})"),
            ScaleKind::Constant { level } => format!("constant({level})"),
            ScaleKind::Custom { .. } => "custom".to_string(),
        };
        write!(f, "ScaleCurve({name})")
    }
}

impl ScaleCurve {
    /// `φ(u) = α·(1 − e^{-u})/u` with `α > 0`.
    ///
    /// Continuous at the origin with `φ(0⁺) = α`; the product `u·φ(u)`
    /// increases to `M_∞ = α` and the elasticity decreases from 0 to −1.
    pub fn decay(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(GsviError::invalid(format!(
                "decay scale needs alpha > 0, got {alpha}"
            )));
        }
        Ok(ScaleCurve {
            kind: ScaleKind::Decay { alpha },
            limit_at_zero: Some(alpha),
            m_infinity: Some(alpha),
            elasticity_at_zero: Some(0.0),
            elasticity_at_infinity: Some(-1.0),
        })
    }

    /// `φ(u) = s·u^{-γ}` with `s > 0`.
    pub fn power(scale: f64, exponent: f64) -> Result<Self> {
        if !scale.is_finite() || scale <= 0.0 || !exponent.is_finite() {
            return Err(GsviError::invalid(format!(
                "power scale needs s > 0 and finite exponent, got s={scale}, exponent={exponent}"
            )));
        }
        let m_infinity = if exponent > 1.0 {
            Some(0.0)
        } else if exponent == 1.0 {
            Some(scale)
        } else {
            None // u·φ(u) diverges
        };
        let limit_at_zero = if exponent > 0.0 {
            None // φ diverges at the origin
        } else if exponent == 0.0 {
            Some(scale)
        } else {
            Some(0.0)
        };
        Ok(ScaleCurve {
            kind: ScaleKind::Power { scale, exponent },
            limit_at_zero,
            m_infinity,
            elasticity_at_zero: Some(-exponent),
            elasticity_at_infinity: Some(-exponent),
        })
    }

    /// Constant scale `φ ≡ level` with `level > 0`.
    pub fn constant(level: f64) -> Result<Self> {
        if !level.is_finite() || level <= 0.0 {
            return Err(GsviError::invalid(format!(
                "constant scale needs level > 0, got {level}"
            )));
        }
        Ok(ScaleCurve {
            kind: ScaleKind::Constant { level },
            limit_at_zero: Some(level),
            m_infinity: None,
            elasticity_at_zero: Some(0.0),
            elasticity_at_infinity: Some(0.0),
        })
    }

    /// User-supplied scale; derivative falls back to central differences when
    /// no closure is given. Limits are declared, not detected.
    pub fn custom(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
        limit_at_zero: Option<f64>,
        m_infinity: Option<f64>,
    ) -> Self {
        ScaleCurve {
            kind: ScaleKind::Custom {
                value: Arc::new(value),
                deriv: deriv.map(|d| Arc::from(d) as ScaleFn),
            },
            limit_at_zero,
            m_infinity,
            elasticity_at_zero: None,
            elasticity_at_infinity: None,
        }
    }

    /// `φ(0⁺)` when finite.
    pub fn limit_at_zero(&self) -> Option<f64> {
        self.limit_at_zero
    }

    /// `M_∞ = lim_{u→∞} u·φ(u)` when finite; `None` when the product diverges.
    pub fn m_infinity(&self) -> Option<f64> {
        self.m_infinity
    }

    /// Declared limit of the elasticity at `0⁺`.
    pub fn elasticity_at_zero(&self) -> Option<f64> {
        self.elasticity_at_zero
    }

    /// Declared limit of the elasticity at +∞.
    pub fn elasticity_at_infinity(&self) -> Option<f64> {
        self.elasticity_at_infinity
    }

    /// Scale value `φ(u)`, `u > 0`; strictly positive.
    pub fn value(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0);
        match &self.kind {
            ScaleKind::Decay { alpha } => {
                if u < 1e-8 {
                    alpha * (1.0 - 0.5 * u + u * u / 6.0)
                } else {
                    alpha * (-f64::exp_m1(-u)) / u
                }
            }
            ScaleKind::Power { scale, exponent } => scale * u.powf(-exponent),
            ScaleKind::Constant { level } => *level,
            ScaleKind::Custom { value, .. } => value(u),
        }
    }

    /// Derivative `φ'(u)`, `u > 0`.
    pub fn deriv(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0);
        match &self.kind {
            ScaleKind::Decay { alpha } => {
                if u < 1e-4 {
                    // series of (u·e^{-u} − (1 − e^{-u}))/u²
                    alpha * (-0.5 + u / 3.0 - u * u / 8.0)
                } else {
                    let em = (-u).exp();
                    alpha * (u * em - (1.0 - em)) / (u * u)
                }
            }
            ScaleKind::Power { scale, exponent } => -exponent * scale * u.powf(-exponent - 1.0),
            ScaleKind::Constant { .. } => 0.0,
            ScaleKind::Custom { value, deriv } => match deriv {
                Some(d) => d(u),
                None => {
                    let h = 1e-6 * u.max(1e-3);
                    (value(u + h) - value(u - h)) / (2.0 * h)
                }
            },
        }
    }

    /// Elasticity `f(u) = u·φ'(u)/φ(u)`, `u > 0`.
    pub fn elasticity(&self, u: f64) -> Result<f64> {
        if u <= 0.0 {
            return Err(GsviError::domain(format!(
                "scale elasticity needs u > 0, got {u}"
            )));
        }
        Ok(match &self.kind {
            ScaleKind::Decay { .. } => {
                if u < 1e-5 {
                    -0.5 * u + u * u / 12.0
                } else {
                    let em = (-u).exp();
                    ((u + 1.0) * em - 1.0) / (1.0 - em)
                }
            }
            ScaleKind::Power { exponent, .. } => -exponent,
            ScaleKind::Constant { .. } => 0.0,
            ScaleKind::Custom { .. } => u * self.deriv(u) / self.value(u),
        })
    }

    /// Derivative of the product `u·φ(u)`, namely `φ(u)·(1 + f(u))`.
    pub fn product_deriv(&self, u: f64) -> Result<f64> {
        Ok(self.value(u) * (1.0 + self.elasticity(u)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn decay_elasticity_closed_form_at_one() {
        let phi = ScaleCurve::decay(1.0).unwrap();
        let e = std::f64::consts::E;
        let expect = (2.0 / e - 1.0) / (1.0 - 1.0 / e);
        assert_abs_diff_eq!(phi.elasticity(1.0).unwrap(), expect, epsilon = 1e-14);
        // ≈ −0.4180233; wing limits 0 and −1
        assert_abs_diff_eq!(phi.elasticity(1.0).unwrap(), -0.4180233, epsilon = 1e-6);
        assert!(phi.elasticity(1e-7).unwrap().abs() < 1e-6);
        assert_abs_diff_eq!(phi.elasticity(50.0).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn decay_derivative_matches_finite_differences() {
        let phi = ScaleCurve::decay(1.3).unwrap();
        for &u in &[1e-5_f64, 1e-3, 0.1, 1.0, 7.0, 40.0] {
            let h = 1e-6 * u.max(1e-2);
            let fd = (phi.value(u + h) - phi.value(u - h)) / (2.0 * h);
            assert_abs_diff_eq!(phi.deriv(u), fd, epsilon = 1e-7);
        }
    }

    #[test]
    fn decay_product_increases_to_m_infinity() {
        let alpha = 0.8;
        let phi = ScaleCurve::decay(alpha).unwrap();
        let grid = crate::num::logspace(1e-3, 1e3, 200);
        let mut prev = 0.0;
        for &u in &grid {
            let prod = u * phi.value(u);
            // strictly increasing until saturation flattens it at f64 precision
            if prev < alpha * (1.0 - 1e-12) {
                assert!(prod > prev, "u·φ(u) must increase at u={u}");
            } else {
                assert!(
                    prod >= prev - 1e-15 * alpha,
                    "u·φ(u) must not decrease at u={u}"
                );
            }
            // one ulp of slack for the u·(α·x/u) round trip
            assert!(prod <= alpha * (1.0 + 1e-15), "u·φ(u) must stay below M_∞");
            prev = prod;
        }
        assert_abs_diff_eq!(prev, alpha, epsilon = 1e-6);
        assert_eq!(phi.m_infinity(), Some(alpha));
    }

    #[test]
    fn power_family_has_constant_elasticity() {
        let phi = ScaleCurve::power(1.0, 2.0).unwrap();
        assert_eq!(phi.elasticity(0.3).unwrap(), -2.0);
        assert_eq!(phi.elasticity(42.0).unwrap(), -2.0);
        assert_eq!(phi.m_infinity(), Some(0.0));
        let borderline = ScaleCurve::power(2.5, 1.0).unwrap();
        assert_eq!(borderline.m_infinity(), Some(2.5));
        let diverging = ScaleCurve::power(1.0, 0.5).unwrap();
        assert_eq!(diverging.m_infinity(), None);
    }

    #[test]
    fn constant_scale_is_flat() {
        let phi = ScaleCurve::constant(3.0).unwrap();
        assert_eq!(phi.value(0.1), 3.0);
        assert_eq!(phi.deriv(5.0), 0.0);
        assert_eq!(phi.elasticity(5.0).unwrap(), 0.0);
        assert_eq!(phi.m_infinity(), None);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ScaleCurve::decay(0.0).is_err());
        assert!(ScaleCurve::decay(-1.0).is_err());
        assert!(ScaleCurve::power(0.0, 2.0).is_err());
        assert!(ScaleCurve::constant(-0.1).is_err());
    }
}
