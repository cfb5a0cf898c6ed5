//! ATM total-variance term structure `t ↦ θ_t`.
//!
//! Families shipped: `linear` (`a·t`), `power` (`a·t^p`, `p ∈ (0, 1]`) and
//! `saturating` (`θ_∞·(1 − e^{-λt})`). The first two diverge, the third has a
//! finite long-run level, which exercises both branches of the wing condition
//! in the butterfly checker.

use std::sync::Arc;

use crate::error::{GsviError, Result};

type ThetaFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum ThetaKind {
    Linear { a: f64 },
    Power { a: f64, p: f64 },
    Saturating { inf: f64, lambda: f64 },
    Custom { value: ThetaFn, deriv: ThetaFn },
}

/// ATM total-variance curve with derivative access and long-run level.
#[derive(Clone)]
pub struct ThetaCurve {
    kind: ThetaKind,
    infinity: f64,
}

impl std::fmt::Debug for ThetaCurve {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match &self.kind {
            ThetaKind::Linear { a } => format!("linear(a={a})"),
            ThetaKind::Power { a, p } => format!("power(a={a}, p={p})"),
            ThetaKind::Saturating { inf, lambda } => {
                format!("saturating(inf={inf}, lambda={lambda})")
            }
            ThetaKind::Custom { .. } => "custom".to_string(),
        };
        write!(f, "ThetaCurve({name})")
    }
}

impl ThetaCurve {
    /// `θ_t = a·t`, `a > 0`.
    pub fn linear(a: f64) -> Result<Self> {
        if !a.is_finite() || a <= 0.0 {
            return Err(GsviError::invalid(format!(
                "linear theta needs a > 0, got {a}"
            )));
        }
        Ok(ThetaCurve {
            kind: ThetaKind::Linear { a },
            infinity: f64::INFINITY,
        })
    }

    /// `θ_t = a·t^p`, `a > 0`, `p ∈ (0, 1]`.
    pub fn power(a: f64, p: f64) -> Result<Self> {
        if !a.is_finite() || a <= 0.0 || !(0.0 < p && p <= 1.0) {
            return Err(GsviError::invalid(format!(
                "power theta needs a > 0 and p in (0, 1], got a={a}, p={p}"
            )));
        }
        Ok(ThetaCurve {
            kind: ThetaKind::Power { a, p },
            infinity: f64::INFINITY,
        })
    }

    /// `θ_t = θ_∞·(1 − e^{-λt})`, both parameters positive.
    pub fn saturating(inf: f64, lambda: f64) -> Result<Self> {
        if !inf.is_finite() || inf <= 0.0 || !lambda.is_finite() || lambda <= 0.0 {
            return Err(GsviError::invalid(format!(
                "saturating theta needs inf > 0 and lambda > 0, got inf={inf}, lambda={lambda}"
            )));
        }
        Ok(ThetaCurve {
            kind: ThetaKind::Saturating { inf, lambda },
            infinity: inf,
        })
    }

    /// User-supplied curve with explicit derivative and declared long-run level.
    pub fn custom(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        infinity: f64,
    ) -> Self {
        ThetaCurve {
            kind: ThetaKind::Custom {
                value: Arc::new(value),
                deriv: Arc::new(deriv),
            },
            infinity,
        }
    }

    /// Long-run level `θ_∞` (may be `f64::INFINITY`).
    pub fn infinity(&self) -> f64 {
        self.infinity
    }

    /// `θ_t` for `t > 0`.
    pub fn value(&self, t: f64) -> f64 {
        debug_assert!(t > 0.0);
        match &self.kind {
            ThetaKind::Linear { a } => a * t,
            ThetaKind::Power { a, p } => a * t.powf(*p),
            ThetaKind::Saturating { inf, lambda } => inf * (-f64::exp_m1(-lambda * t)),
            ThetaKind::Custom { value, .. } => value(t),
        }
    }

    /// `θ'_t` for `t > 0`.
    pub fn deriv(&self, t: f64) -> f64 {
        debug_assert!(t > 0.0);
        match &self.kind {
            ThetaKind::Linear { a } => *a,
            ThetaKind::Power { a, p } => a * p * t.powf(p - 1.0),
            ThetaKind::Saturating { inf, lambda } => inf * lambda * (-lambda * t).exp(),
            ThetaKind::Custom { deriv, .. } => deriv(t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn families_vanish_at_the_origin() {
        let curves = [
            ThetaCurve::linear(1.0).unwrap(),
            ThetaCurve::power(0.5, 0.7).unwrap(),
            ThetaCurve::saturating(2.0, 0.8).unwrap(),
        ];
        for theta in &curves {
            let mut prev = f64::INFINITY;
            for &t in &[1e-2, 1e-4, 1e-6] {
                let v = theta.value(t);
                assert!(v > 0.0 && v < prev, "{theta:?} must decrease to 0 at t={t}");
                prev = v;
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let curves = [
            ThetaCurve::linear(1.3).unwrap(),
            ThetaCurve::power(0.5, 0.7).unwrap(),
            ThetaCurve::saturating(2.0, 0.8).unwrap(),
        ];
        for theta in &curves {
            for &t in &[0.05, 0.5, 2.0, 9.0] {
                let h = 1e-6 * t;
                let fd = (theta.value(t + h) - theta.value(t - h)) / (2.0 * h);
                assert_abs_diff_eq!(theta.deriv(t), fd, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn saturating_level_is_the_declared_infinity() {
        let theta = ThetaCurve::saturating(1.5, 2.0).unwrap();
        assert_eq!(theta.infinity(), 1.5);
        assert_abs_diff_eq!(theta.value(100.0), 1.5, epsilon = 1e-12);
        assert_eq!(ThetaCurve::linear(1.0).unwrap().infinity(), f64::INFINITY);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ThetaCurve::linear(0.0).is_err());
        assert!(ThetaCurve::power(1.0, 0.0).is_err());
        assert!(ThetaCurve::power(1.0, 1.5).is_err());
        assert!(ThetaCurve::saturating(1.0, 0.0).is_err());
    }
}
