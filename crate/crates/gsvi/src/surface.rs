//! Total-variance surface `w(k, t) = θ_t · Ψ(k·φ(θ_t))` and its fixed-maturity
//! slices.
//!
//! `k` is log-moneyness (forward = 1, zero rates), `t > 0` the maturity and
//! `w` total implied variance `σ(k, t)²·t`. The surface is the composition of
//! a [`SmileShape`], a [`ScaleCurve`] and a [`ThetaCurve`]; all partial
//! derivatives follow by the chain rule from the component derivatives.

use crate::error::{GsviError, Result};
use crate::scale::ScaleCurve;
use crate::shape::{Side, SmileShape};
use crate::theta::ThetaCurve;

/// Immutable total-variance surface.
#[derive(Debug, Clone)]
pub struct Surface {
    pub shape: SmileShape,
    pub scale: ScaleCurve,
    pub theta: ThetaCurve,
}

/// Pointwise partial derivatives of the surface at `(k, t)`.
#[derive(Debug, Clone, Copy)]
pub struct Partials {
    /// Total variance `w(k, t)`.
    pub w: f64,
    /// `∂_k w`.
    pub d_k: f64,
    /// `∂²_kk w` (classical value, excludes kink atoms).
    pub d_kk: f64,
    /// `∂_t w`.
    pub d_t: f64,
}

impl Surface {
    pub fn new(shape: SmileShape, scale: ScaleCurve, theta: ThetaCurve) -> Self {
        Surface {
            shape,
            scale,
            theta,
        }
    }

    /// Total variance `w(k, t) = θ_t·Ψ(k·φ(θ_t))`, strictly positive.
    pub fn total_variance(&self, k: f64, t: f64) -> Result<f64> {
        let (theta, scale) = self.slice_params(t)?;
        Ok(theta * self.shape.value(k * scale))
    }

    /// All four pointwise partials at `(k, t)`.
    ///
    /// Errors with [`GsviError::AtKnot`] when `k·φ(θ_t)` lands exactly on a
    /// kink of the shape; use [`partials_side`](Self::partials_side) there.
    pub fn partials(&self, k: f64, t: f64) -> Result<Partials> {
        let (theta, scale) = self.slice_params(t)?;
        let z = k * scale;
        if self.shape.is_knot(z) {
            return Err(GsviError::AtKnot { z });
        }
        Ok(self.partials_at(k, t, theta, scale, Side::Right))
    }

    /// One-sided partials for points sitting exactly on a kink.
    pub fn partials_side(&self, k: f64, t: f64, side: Side) -> Result<Partials> {
        let (theta, scale) = self.slice_params(t)?;
        Ok(self.partials_at(k, t, theta, scale, side))
    }

    fn partials_at(&self, k: f64, t: f64, theta: f64, scale: f64, side: Side) -> Partials {
        let z = k * scale;
        let psi = self.shape.value(z);
        let dpsi = self.shape.deriv_side(z, side);
        let d2psi = self.shape.deriv2_side(z, side);
        let dtheta = self.theta.deriv(t);
        Partials {
            w: theta * psi,
            d_k: theta * scale * dpsi,
            d_kk: theta * scale * scale * d2psi,
            d_t: dtheta * (psi + dpsi * k * self.scale.deriv(theta) * theta),
        }
    }

    /// Fixed-`t` view of the surface.
    pub fn slice(&self, t: f64) -> Result<VarianceSlice> {
        let (theta, scale) = self.slice_params(t)?;
        Ok(VarianceSlice {
            shape: self.shape.clone(),
            theta,
            scale,
            t,
            reflected: false,
        })
    }

    fn slice_params(&self, t: f64) -> Result<(f64, f64)> {
        if t.is_nan() || t <= 0.0 {
            return Err(GsviError::domain(format!(
                "maturity must be positive, got {t}"
            )));
        }
        let theta = self.theta.value(t);
        if theta.is_nan() || theta <= 0.0 {
            return Err(GsviError::domain(format!(
                "degenerate surface: theta({t}) = {theta}"
            )));
        }
        let scale = self.scale.value(theta);
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(GsviError::domain(format!(
                "scale must be positive and finite, got phi({theta}) = {scale}"
            )));
        }
        Ok((theta, scale))
    }
}

/// A kink of a variance slice: position in log-moneyness and the jump of `v'`.
#[derive(Debug, Clone, Copy)]
pub struct Kink {
    /// Log-moneyness of the kink, `aᵢ/φ(θ_t)`.
    pub k: f64,
    /// Jump `v'(k⁺) − v'(k⁻) = θ_t·φ(θ_t)·αᵢ`.
    pub slope_jump: f64,
}

/// One maturity of a surface: `v(k) = w(k, t)` with derivative access.
///
/// Supports reflection `v̂(k) = v(−k)`, used to study the distribution seen
/// from the reversed numéraire.
#[derive(Debug, Clone)]
pub struct VarianceSlice {
    shape: SmileShape,
    theta: f64,
    scale: f64,
    t: f64,
    reflected: bool,
}

impl VarianceSlice {
    /// The maturity this slice was taken at.
    pub fn t(&self) -> f64 {
        self.t
    }

    /// ATM total variance `θ_t` of the slice.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Scale `φ(θ_t)` of the slice.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The reflected slice `k ↦ v(−k)`.
    pub fn reflected(&self) -> VarianceSlice {
        VarianceSlice {
            shape: self.shape.clone(),
            theta: self.theta,
            scale: self.scale,
            t: self.t,
            reflected: !self.reflected,
        }
    }

    #[inline]
    fn z(&self, k: f64) -> f64 {
        let sign = if self.reflected { -1.0 } else { 1.0 };
        sign * k * self.scale
    }

    /// Rescaled coordinate `z` the shape is evaluated at for this `k`.
    pub fn rescaled_coord(&self, k: f64) -> f64 {
        self.z(k)
    }

    /// Map a slice-level side to the shape-level side (flips under reflection).
    pub fn shape_side(&self, side: Side) -> Side {
        if self.reflected {
            match side {
                Side::Right => Side::Left,
                Side::Left => Side::Right,
            }
        } else {
            side
        }
    }

    /// Slice value `v(k) > 0`.
    pub fn value(&self, k: f64) -> f64 {
        self.theta * self.shape.value(self.z(k))
    }

    /// Whether `k` sits exactly on a kink of the slice.
    pub fn is_kink(&self, k: f64) -> bool {
        self.shape.is_knot(self.z(k))
    }

    /// `v'(k)`; errors on a kink.
    pub fn deriv(&self, k: f64) -> Result<f64> {
        let z = self.z(k);
        if self.shape.is_knot(z) {
            return Err(GsviError::AtKnot { z });
        }
        Ok(self.deriv_side(k, Side::Right))
    }

    /// One-sided `v'(k)`.
    pub fn deriv_side(&self, k: f64, side: Side) -> f64 {
        let sign = if self.reflected { -1.0 } else { 1.0 };
        // the side flips under reflection: v̂'(k⁺) = −v'((−k)⁻)
        sign * self.theta * self.scale * self.shape.deriv_side(self.z(k), self.shape_side(side))
    }

    /// Classical `v''(k)`; errors on a kink.
    pub fn deriv2(&self, k: f64) -> Result<f64> {
        let z = self.z(k);
        if self.shape.is_knot(z) {
            return Err(GsviError::AtKnot { z });
        }
        Ok(self.theta * self.scale * self.scale * self.shape.deriv2(z)?)
    }

    /// One-sided classical `v''` just off a kink.
    pub fn deriv2_side(&self, k: f64, side: Side) -> f64 {
        self.theta
            * self.scale
            * self.scale
            * self.shape.deriv2_side(self.z(k), self.shape_side(side))
    }

    /// Kinks of the slice in log-moneyness, with their `v'` jumps.
    ///
    /// Jumps are invariant under reflection (positions flip sign).
    pub fn kinks(&self) -> Vec<Kink> {
        let sign = if self.reflected { -1.0 } else { 1.0 };
        let mut kinks: Vec<Kink> = self
            .shape
            .knots()
            .iter()
            .zip(self.shape.jumps())
            .map(|(&a, &jump)| Kink {
                k: sign * a / self.scale,
                slope_jump: self.theta * self.scale * jump,
            })
            .collect();
        kinks.sort_by(|x, y| x.k.total_cmp(&y.k));
        kinks
    }

    /// Underlying shape of the slice.
    pub fn shape(&self) -> &SmileShape {
        &self.shape
    }
}

/// Preset surfaces used across checks and the command line.
impl Surface {
    /// SVI shape with the bounded-product scale `φ(u) = α(1−e^{-u})/u` and
    /// linear ATM variance `θ_t = t`.
    pub fn svi_preset(rho: f64, alpha: f64) -> Result<Self> {
        Ok(Surface::new(
            SmileShape::svi(rho)?,
            ScaleCurve::decay(alpha)?,
            ThetaCurve::linear(1.0)?,
        ))
    }

    /// The kinked square-root shape with `φ(u) = (1−e^{-u})/u` and `θ_t = t`.
    pub fn sqrt_kink_preset() -> Self {
        Surface::new(
            SmileShape::sqrt_kink(),
            ScaleCurve::decay(1.0).expect("alpha = 1 is valid"),
            ThetaCurve::linear(1.0).expect("a = 1 is valid"),
        )
    }

    /// The power-law shape `Ψ_ν` with `φ(u) = α(1−e^{-u})/u` and `θ_t = t`.
    pub fn power_law_preset(nu: f64, alpha: f64) -> Result<Self> {
        Ok(Surface::new(
            SmileShape::power_law(nu)?,
            ScaleCurve::decay(alpha)?,
            ThetaCurve::linear(1.0)?,
        ))
    }
}
