//! The smile-shape function Ψ: the dimensionless factor of the total-variance
//! surface `w(k, t) = θ_t · Ψ(k·φ(θ_t))`.
//!
//! A shape is positive, equals one at the origin, and may have a finite set of
//! declared kinks ("knots") where its first derivative jumps. Wings may be
//! asymptotically linear, i.e. `Ψ'` tends to finite non-zero slopes at ±∞;
//! those slopes drive the moment and large-strike diagnostics downstream.
//!
//! Built-in shapes:
//!
//! ```text
//! svi(ρ):        Ψ(z) = (1 + ρz + √(z² + 2ρz + 1)) / 2,          ρ ∈ (−1, 1)
//! sqrt_kink:     Ψ(z) = |z| + (1 + √(1 + |z|)) / 2
//! power_law(ν):  Ψ(z) = (1 + |z|^ν)^(1/ν),                        ν > 1
//! ```
//!
//! `sqrt_kink` has a kink at the origin with derivative jump 5/2; `power_law`
//! declares the origin as a knot with jump 0 (its first derivative is
//! continuous there for every ν > 1, but the second derivative is singular
//! when ν < 2, so the origin is excluded from pointwise second-order work).

use std::sync::Arc;

use crate::error::{GsviError, Result};
use crate::num;

/// Which one-sided limit to take at a kink.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone)]
enum ShapeKind {
    Svi {
        rho: f64,
    },
    SqrtKink,
    PowerLaw {
        nu: f64,
    },
    Custom {
        value: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

/// Smile shape Ψ with derivative access, declared knots and wing slopes.
///
/// Immutable after construction; evaluation is pure and thread-safe.
#[derive(Clone)]
pub struct SmileShape {
    kind: ShapeKind,
    knots: Vec<f64>,
    jumps: Vec<f64>,
    slope_pos: Option<f64>,
    slope_neg: Option<f64>,
}

impl std::fmt::Debug for SmileShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match &self.kind {
            ShapeKind::Svi { rho } => format!("svi(rho={rho})"),
            ShapeKind::SqrtKink => "sqrt_kink".to_string(),
            ShapeKind::PowerLaw { nu } => format!("power_law(nu={nu})"),
            ShapeKind::Custom { .. } => "custom".to_string(),
        };
        f.debug_struct("SmileShape")
            .field("kind", &name)
            .field("knots", &self.knots)
            .field("jumps", &self.jumps)
            .finish()
    }
}

impl SmileShape {
    /// SVI shape `Ψ(z) = (1 + ρz + √(z² + 2ρz + 1))/2` with skew `ρ ∈ (−1, 1)`.
    ///
    /// Smooth everywhere; wing slopes are `(ρ ± 1)/2`.
    pub fn svi(rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho.abs() >= 1.0 {
            return Err(GsviError::invalid(format!(
                "svi shape needs |rho| < 1, got {rho}"
            )));
        }
        Ok(SmileShape {
            kind: ShapeKind::Svi { rho },
            knots: Vec::new(),
            jumps: Vec::new(),
            slope_pos: Some(0.5 * (rho + 1.0)),
            slope_neg: Some(0.5 * (rho - 1.0)),
        })
    }

    /// Kinked shape `Ψ(z) = |z| + (1 + √(1 + |z|))/2`.
    ///
    /// One knot at the origin where `Ψ'` jumps from −5/4 to 5/4.
    pub fn sqrt_kink() -> Self {
        SmileShape {
            kind: ShapeKind::SqrtKink,
            knots: vec![0.0],
            jumps: vec![2.5],
            slope_pos: Some(1.0),
            slope_neg: Some(-1.0),
        }
    }

    /// Power-law shape `Ψ(z) = (1 + |z|^ν)^{1/ν}` with `ν > 1`.
    ///
    /// The origin is declared as a knot with jump 0: `Ψ'` is continuous there
    /// but `Ψ''` is singular for ν < 2, so second-order pointwise evaluation
    /// excludes it. Wing slopes are ±1.
    pub fn power_law(nu: f64) -> Result<Self> {
        if !nu.is_finite() || nu <= 1.0 {
            return Err(GsviError::invalid(format!(
                "power_law shape needs nu > 1, got {nu}"
            )));
        }
        Ok(SmileShape {
            kind: ShapeKind::PowerLaw { nu },
            knots: vec![0.0],
            jumps: vec![0.0],
            slope_pos: Some(1.0),
            slope_neg: Some(-1.0),
        })
    }

    /// User-supplied shape backed by a value closure.
    ///
    /// Derivatives fall back to adaptive central differences with step
    /// `1e-5·max(1, |z|)`. Knots, their jumps and wing slopes must be declared
    /// up front: kinks are structural data, never detected numerically.
    pub fn custom(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        knots: Vec<f64>,
        jumps: Vec<f64>,
        slope_neg: Option<f64>,
        slope_pos: Option<f64>,
    ) -> Result<Self> {
        if knots.len() != jumps.len() {
            return Err(GsviError::invalid(
                "knots and jumps must have the same length",
            ));
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GsviError::invalid("knots must be strictly increasing"));
        }
        let v0 = value(0.0);
        if (v0 - 1.0).abs() > 1e-12 {
            return Err(GsviError::invalid(format!(
                "shape must satisfy Psi(0) = 1, got {v0}"
            )));
        }
        Ok(SmileShape {
            kind: ShapeKind::Custom {
                value: Arc::new(value),
            },
            knots,
            jumps,
            slope_pos,
            slope_neg,
        })
    }

    /// Knot positions (possibly empty), strictly increasing.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Jump sizes `Ψ'(aᵢ⁺) − Ψ'(aᵢ⁻)`, aligned with [`knots`](Self::knots).
    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    /// Declared wing slope of `Ψ'` at +∞, when asymptotically linear.
    pub fn slope_pos(&self) -> Option<f64> {
        self.slope_pos
    }

    /// Declared wing slope of `Ψ'` at −∞, when asymptotically linear.
    pub fn slope_neg(&self) -> Option<f64> {
        self.slope_neg
    }

    /// True when both wing slopes are declared finite and non-zero.
    pub fn is_asymptotically_linear(&self) -> bool {
        matches!((self.slope_neg, self.slope_pos), (Some(a), Some(b)) if a != 0.0 && b != 0.0)
    }

    /// Whether `z` is exactly a declared knot.
    pub fn is_knot(&self, z: f64) -> bool {
        self.knots.contains(&z)
    }

    /// Shape value `Ψ(z)`, strictly positive.
    pub fn value(&self, z: f64) -> f64 {
        match &self.kind {
            ShapeKind::Svi { rho } => {
                let r = svi_radical(z, *rho);
                0.5 * (1.0 + rho * z + r)
            }
            ShapeKind::SqrtKink => {
                let m = z.abs();
                m + 0.5 * (1.0 + (1.0 + m).sqrt())
            }
            ShapeKind::PowerLaw { nu } => {
                let m = z.abs();
                if m <= 1.0 {
                    (1.0 + m.powf(*nu)).powf(1.0 / nu)
                } else {
                    // (1 + m^nu)^(1/nu) = m · (1 + m^(-nu))^(1/nu), overflow-safe
                    m * ((m.powf(-nu).ln_1p()) / nu).exp()
                }
            }
            ShapeKind::Custom { value } => value(z),
        }
    }

    /// First derivative at `z`; errors with [`GsviError::AtKnot`] on a knot.
    pub fn deriv(&self, z: f64) -> Result<f64> {
        if self.is_knot(z) {
            return Err(GsviError::AtKnot { z });
        }
        Ok(self.deriv_unchecked(z))
    }

    /// One-sided first derivative, defined everywhere.
    pub fn deriv_side(&self, z: f64, side: Side) -> f64 {
        if !self.is_knot(z) {
            return self.deriv_unchecked(z);
        }
        match &self.kind {
            ShapeKind::SqrtKink => match side {
                Side::Right => 1.25,
                Side::Left => -1.25,
            },
            ShapeKind::PowerLaw { .. } => 0.0,
            ShapeKind::Custom { value } => {
                let h = 1e-5 * z.abs().max(1.0);
                match side {
                    Side::Right => (value(z + h) - value(z)) / h,
                    Side::Left => (value(z) - value(z - h)) / h,
                }
            }
            // smooth kinds have no knots
            ShapeKind::Svi { .. } => self.deriv_unchecked(z),
        }
    }

    fn deriv_unchecked(&self, z: f64) -> f64 {
        match &self.kind {
            ShapeKind::Svi { rho } => {
                let r = svi_radical(z, *rho);
                0.5 * (rho + (z + rho) / r)
            }
            ShapeKind::SqrtKink => {
                let m = z.abs();
                z.signum() * (1.0 + 0.25 / (1.0 + m).sqrt())
            }
            ShapeKind::PowerLaw { nu } => {
                let m = z.abs();
                if m == 0.0 {
                    return 0.0;
                }
                let d = if m <= 1.0 {
                    (1.0 + m.powf(*nu)).powf(1.0 / nu - 1.0) * m.powf(nu - 1.0)
                } else {
                    // (1 + m^(-nu))^((1-nu)/nu), overflow-safe
                    ((m.powf(-nu).ln_1p()) * (1.0 - nu) / nu).exp()
                };
                z.signum() * d
            }
            ShapeKind::Custom { value } => {
                let h = 1e-5 * z.abs().max(1.0);
                (value(z + h) - value(z - h)) / (2.0 * h)
            }
        }
    }

    /// Second derivative at `z`; errors with [`GsviError::AtKnot`] on a knot.
    pub fn deriv2(&self, z: f64) -> Result<f64> {
        if self.is_knot(z) {
            return Err(GsviError::AtKnot { z });
        }
        Ok(match &self.kind {
            ShapeKind::Svi { rho } => {
                let r = svi_radical(z, *rho);
                0.5 * (1.0 - rho * rho) / (r * r * r)
            }
            ShapeKind::SqrtKink => {
                let m = z.abs();
                -1.0 / (8.0 * (1.0 + m).powf(1.5))
            }
            ShapeKind::PowerLaw { nu } => {
                let m = z.abs();
                if m <= 1.0 {
                    (nu - 1.0) * (1.0 + m.powf(*nu)).powf(1.0 / nu - 2.0) * m.powf(nu - 2.0)
                } else {
                    // (nu-1) · m^(-nu-1) · (1 + m^(-nu))^(1/nu - 2)
                    (nu - 1.0)
                        * m.powf(-nu - 1.0)
                        * ((m.powf(-nu).ln_1p()) * (1.0 / nu - 2.0)).exp()
                }
            }
            ShapeKind::Custom { value } => {
                let h = 1e-5 * z.abs().max(1.0);
                (value(z + h) - 2.0 * value(z) + value(z - h)) / (h * h)
            }
        })
    }

    /// One-sided classical second derivative, evaluated just off a knot.
    pub fn deriv2_side(&self, z: f64, side: Side) -> f64 {
        if !self.is_knot(z) {
            return self.deriv2(z).expect("knot excluded");
        }
        let eps = 1e-12 * (1.0 + z.abs());
        let z_off = match side {
            Side::Right => z + eps,
            Side::Left => z - eps,
        };
        self.deriv2(z_off).unwrap_or(f64::NAN)
    }

    /// Elasticity `z·Ψ'(z)/Ψ(z)`; zero at the origin, tends to 1 on linear wings.
    pub fn elasticity(&self, z: f64) -> Result<f64> {
        if z == 0.0 && !self.is_knot(0.0) {
            return Ok(0.0);
        }
        Ok(z * self.deriv(z)? / self.value(z))
    }

    /// One-sided elasticity, defined at knots as well.
    pub fn elasticity_side(&self, z: f64, side: Side) -> f64 {
        z * self.deriv_side(z, side) / self.value(z)
    }

    /// Numerically estimated wing slopes of `Ψ'` with a linearity verdict.
    ///
    /// Samples `Ψ'` on a geometric grid `z = 100·2^j` and extrapolates with
    /// Aitken Δ². The verdict is true only when both extrapolations stabilise
    /// on finite non-zero limits.
    pub fn estimate_wing_slopes(&self) -> WingSlopes {
        let (pos, pos_ok) = self.wing_limit(1.0);
        let (neg, neg_ok) = self.wing_limit(-1.0);
        let linear = pos_ok && neg_ok && pos.abs() > 1e-6 && neg.abs() > 1e-6;
        WingSlopes { neg, pos, linear }
    }

    fn wing_limit(&self, direction: f64) -> (f64, bool) {
        let samples: Vec<f64> = (0..9)
            .map(|j| self.deriv_unchecked(direction * 100.0 * f64::powi(2.0, j)))
            .collect();
        let e1 = num::aitken(samples[4], samples[5], samples[6]);
        let e2 = num::aitken(samples[5], samples[6], samples[7]);
        let e3 = num::aitken(samples[6], samples[7], samples[8]);
        let converged = e3.is_finite() && (e3 - e2).abs() <= 1e-4 && (e2 - e1).abs() <= 1e-3;
        (e3, converged)
    }
}

/// Result of [`SmileShape::estimate_wing_slopes`].
#[derive(Debug, Clone, Copy)]
pub struct WingSlopes {
    /// Estimated limit of `Ψ'` at −∞.
    pub neg: f64,
    /// Estimated limit of `Ψ'` at +∞.
    pub pos: f64,
    /// True when both limits exist, finite and non-zero.
    pub linear: bool,
}

#[inline]
fn svi_radical(z: f64, rho: f64) -> f64 {
    // √(z² + 2ρz + 1) written as √((z+ρ)² + 1−ρ²) to stay positive under rounding
    ((z + rho) * (z + rho) + (1.0 - rho * rho)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn fd1(shape: &SmileShape, z: f64) -> f64 {
        let h = 1e-5 * z.abs().max(1.0);
        (shape.value(z + h) - shape.value(z - h)) / (2.0 * h)
    }

    fn fd2(shape: &SmileShape, z: f64) -> f64 {
        let h = 1e-5 * z.abs().max(1.0);
        (shape.deriv(z + h).unwrap() - shape.deriv(z - h).unwrap()) / (2.0 * h)
    }

    #[test]
    fn all_shapes_are_one_at_origin() {
        for shape in [
            SmileShape::svi(0.0).unwrap(),
            SmileShape::svi(-0.7).unwrap(),
            SmileShape::sqrt_kink(),
            SmileShape::power_law(3.5).unwrap(),
        ] {
            assert_eq!(shape.value(0.0), 1.0);
        }
    }

    #[test]
    fn symmetric_svi_closed_values() {
        let shape = SmileShape::svi(0.0).unwrap();
        // Ψ(√3) = (1 + √(1+3))/2 = 3/2
        assert_abs_diff_eq!(shape.value(3.0_f64.sqrt()), 1.5, epsilon = 1e-14);
        // Ψ'(0) = 0 by symmetry, Ψ''(0) = 1/2
        assert_abs_diff_eq!(shape.deriv(0.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(shape.deriv2(0.0).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let shapes = [
            SmileShape::svi(0.0).unwrap(),
            SmileShape::svi(0.4).unwrap(),
            SmileShape::svi(-0.8).unwrap(),
            SmileShape::sqrt_kink(),
            SmileShape::power_law(1.5).unwrap(),
            SmileShape::power_law(2.0).unwrap(),
            SmileShape::power_law(3.5).unwrap(),
            SmileShape::power_law(8.0).unwrap(),
        ];
        for shape in &shapes {
            for &z in &[-7.3, -2.0, -0.6, 0.3, 1.0, 4.2, 9.5] {
                let d1 = shape.deriv(z).unwrap();
                let d2 = shape.deriv2(z).unwrap();
                let rel1 = (d1 - fd1(shape, z)).abs() / d1.abs().max(1e-6);
                let rel2 = (d2 - fd2(shape, z)).abs() / d2.abs().max(1e-6);
                assert!(rel1 < 1e-5, "{shape:?} deriv mismatch at z={z}: {rel1:e}");
                assert!(rel2 < 1e-5, "{shape:?} deriv2 mismatch at z={z}: {rel2:e}");
            }
        }
    }

    #[test]
    fn declared_jumps_match_measured_one_sided_differences() {
        for shape in [SmileShape::sqrt_kink(), SmileShape::power_law(3.5).unwrap()] {
            for (i, &a) in shape.knots().iter().enumerate() {
                let measured = shape.deriv_side(a, Side::Right) - shape.deriv_side(a, Side::Left);
                assert_abs_diff_eq!(measured, shape.jumps()[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn knot_evaluation_errors_without_side() {
        let shape = SmileShape::sqrt_kink();
        assert!(matches!(shape.deriv(0.0), Err(GsviError::AtKnot { .. })));
        assert!(matches!(shape.deriv2(0.0), Err(GsviError::AtKnot { .. })));
        assert_eq!(shape.deriv_side(0.0, Side::Right), 1.25);
        assert_eq!(shape.deriv_side(0.0, Side::Left), -1.25);
    }

    #[test]
    fn declared_wing_slopes_are_approached_by_deriv() {
        let cases: Vec<SmileShape> = vec![
            SmileShape::svi(0.0).unwrap(),
            SmileShape::svi(0.5).unwrap(),
            SmileShape::sqrt_kink(),
            SmileShape::power_law(2.5).unwrap(),
        ];
        for shape in cases {
            let target = shape.slope_pos().unwrap();
            let mut last_gap = f64::INFINITY;
            for &z in &[1e2, 1e3, 1e4] {
                let gap = (shape.deriv(z).unwrap() - target).abs();
                assert!(
                    gap < last_gap,
                    "{shape:?}: wing gap not decreasing at z={z}"
                );
                last_gap = gap;
            }
        }
    }

    #[test]
    fn estimated_wing_slopes_match_declared() {
        for shape in [
            SmileShape::svi(0.0).unwrap(),
            SmileShape::svi(0.3).unwrap(),
            SmileShape::sqrt_kink(),
            SmileShape::power_law(2.0).unwrap(),
            SmileShape::power_law(3.5).unwrap(),
        ] {
            let est = shape.estimate_wing_slopes();
            assert!(est.linear, "{shape:?} should be asymptotically linear");
            assert_abs_diff_eq!(est.pos, shape.slope_pos().unwrap(), epsilon = 1e-5);
            assert_abs_diff_eq!(est.neg, shape.slope_neg().unwrap(), epsilon = 1e-5);
        }
    }

    #[test]
    fn custom_shape_with_unit_wing_slope() {
        // Ψ(z) = 1 + z²/(1 + |z|): smooth at the origin, wing slope ±1.
        let shape = SmileShape::custom(
            |z: f64| 1.0 + z * z / (1.0 + z.abs()),
            vec![],
            vec![],
            Some(-1.0),
            Some(1.0),
        )
        .unwrap();
        let est = shape.estimate_wing_slopes();
        assert!(est.linear);
        assert_abs_diff_eq!(est.pos, 1.0, epsilon = 1e-3);
        assert_abs_diff_eq!(est.neg, -1.0, epsilon = 1e-3);
    }

    #[test]
    fn elasticity_closed_forms() {
        let sym = SmileShape::svi(0.0).unwrap();
        assert_eq!(sym.elasticity(0.0).unwrap(), 0.0);
        // F(1) = 1/(√2·(1+√2))
        let f1 = 1.0 / (2.0_f64.sqrt() * (1.0 + 2.0_f64.sqrt()));
        assert_abs_diff_eq!(sym.elasticity(1.0).unwrap(), f1, epsilon = 1e-12);
        assert_abs_diff_eq!(sym.elasticity(1.0).unwrap(), 0.29289, epsilon = 1e-5);
        // power-law elasticity is |z|^ν/(1+|z|^ν)
        let pl = SmileShape::power_law(3.0).unwrap();
        let z = 1.7_f64;
        let expect = z.powf(3.0) / (1.0 + z.powf(3.0));
        assert_abs_diff_eq!(pl.elasticity(z).unwrap(), expect, epsilon = 1e-12);
    }

    #[test]
    fn elasticity_tends_to_one_on_linear_wings() {
        for shape in [
            SmileShape::svi(0.0).unwrap(),
            SmileShape::power_law(3.5).unwrap(),
        ] {
            assert!((shape.elasticity(1e4).unwrap() - 1.0).abs() < 1e-3);
            assert!((shape.elasticity(-1e4).unwrap() - 1.0).abs() < 1e-3);
        }
        // the kinked shape converges at rate 1/(4√z): 2.5e-3 at z = 1e4
        let kinked = SmileShape::sqrt_kink();
        let gap4 = (kinked.elasticity(1e4).unwrap() - 1.0).abs();
        let gap6 = (kinked.elasticity(1e6).unwrap() - 1.0).abs();
        assert!(gap4 < 4e-3 && gap6 < gap4 && gap6 < 1e-3);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(SmileShape::svi(1.0).is_err());
        assert!(SmileShape::svi(-1.0).is_err());
        assert!(SmileShape::svi(f64::NAN).is_err());
        assert!(SmileShape::power_law(1.0).is_err());
        assert!(SmileShape::power_law(0.5).is_err());
    }

    #[test]
    fn power_law_is_stable_in_far_wings() {
        let shape = SmileShape::power_law(8.0).unwrap();
        let z = 1e4;
        assert!((shape.value(z) / z - 1.0).abs() < 1e-10);
        assert!((shape.deriv(z).unwrap() - 1.0).abs() < 1e-10);
        assert!(shape.deriv2(z).unwrap().abs() < 1e-20);
    }
}
