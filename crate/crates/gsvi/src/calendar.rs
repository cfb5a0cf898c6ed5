//! Calendar-spread arbitrage checks through the first coupling condition.
//!
//! With the elasticities `F(z) = z·Ψ'(z)/Ψ(z)` and `f(u) = u·φ'(u)/φ(u)`, the
//! surface `w(k, t) = θ_t·Ψ(k·φ(θ_t))` is non-decreasing in maturity exactly
//! when
//!
//! ```text
//! (i)  θ is non-decreasing, and
//! (ii) 1 + F(z)·f(u) ≥ 0   for all z ∈ ℝ and u ∈ (0, θ_∞).
//! ```
//!
//! Condition (ii) has the compact equivalent `1 − sup F₊·sup f₋ ≥ 0` and
//! `1 − sup F₋·sup f₊ ≥ 0` (positive/negative parts taken pointwise). When Ψ
//! is asymptotically linear, `F → 1` in both wings, and (ii) collapses to
//! `1 + f(u) ≥ 0`, i.e. `u ↦ u·φ(u)` non-decreasing; for the symmetric SVI
//! shape that necessary condition is also sufficient.
//!
//! Suprema are estimated on wide logarithmic grids and refined with the
//! declared analytic limits of `F` and `f`, which is exact for the shipped
//! families because their elasticities are monotone in the wings.

use serde::Serialize;

use crate::error::{GsviError, Result};
use crate::num;
use crate::scale::ScaleCurve;
use crate::shape::SmileShape;
use crate::surface::Surface;

/// Margin tolerance: margins are O(1) combinations of well-conditioned ratios.
pub const MARGIN_TOL: f64 = 1e-9;

/// A located failure inside a [`CalendarVerdict`].
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CalendarWitness {
    /// `θ'` negative at `t`.
    Theta { t: f64, value: f64 },
    /// `1 + F(z)·f(u)` negative at `(z, u)`.
    Coupling { z: f64, u: f64, value: f64 },
}

/// Verdict of the calendar-spread check.
#[derive(Debug, Clone, Serialize)]
pub struct CalendarVerdict {
    /// Overall pass: θ monotone and coupling margin above `−tol`.
    pub pass: bool,
    /// Whether `θ'` stayed non-negative on the time grid.
    pub theta_monotone: bool,
    /// `inf 1 + F(z)·f(u)` over the grids, refined by analytic limits.
    pub coupling_margin: f64,
    /// `(1 − sup F₊·sup f₋, 1 − sup F₋·sup f₊)`.
    pub compact_margins: (f64, f64),
    /// Product-monotonicity verdict `u ↦ u·φ(u)` (meaningful for
    /// asymptotically linear shapes); `None` when the shape has no wings.
    pub uphi_monotone: Option<bool>,
    /// Failure locations, empty on pass.
    pub witnesses: Vec<CalendarWitness>,
}

/// Supremum estimates behind the compact form of the coupling condition.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CompactBounds {
    /// `sup max(F, 0)`.
    pub sup_shape_pos: f64,
    /// `sup max(−F, 0)`.
    pub sup_shape_neg: f64,
    /// `sup max(f, 0)`.
    pub sup_scale_pos: f64,
    /// `sup max(−f, 0)`.
    pub sup_scale_neg: f64,
    /// `(1 − sup F₊·sup f₋, 1 − sup F₋·sup f₊)`.
    pub margins: (f64, f64),
}

/// Default shape grid: `±logspace(1e-3, 1e4, 400)` plus the origin.
pub fn default_z_grid() -> Vec<f64> {
    num::symmetric_log_grid(1e-3, 1e4, 400)
}

/// Default variance grid: `logspace(1e-3, min(θ_∞·(1−1e-6), 1e3), 300)`.
///
/// For a saturating term structure the grid stops just short of `θ_∞`.
pub fn default_u_grid(theta_infinity: f64) -> Vec<f64> {
    let hi = if theta_infinity.is_finite() {
        theta_infinity * (1.0 - 1e-6)
    } else {
        1e3
    };
    num::logspace(1e-3, hi.max(2e-3), 300)
}

/// Values of `F` on a grid plus its declared wing limits, knots skipped.
fn shape_elasticity_samples(shape: &SmileShape, z_grid: &[f64]) -> Vec<(f64, f64)> {
    let mut samples: Vec<(f64, f64)> = z_grid
        .iter()
        .filter(|&&z| !shape.is_knot(z))
        .map(|&z| (z, shape.elasticity(z).expect("knots filtered")))
        .collect();
    if shape.is_asymptotically_linear() {
        // F → 1 in both wings
        samples.push((f64::INFINITY, 1.0));
        samples.push((f64::NEG_INFINITY, 1.0));
    }
    samples
}

/// Values of `f` on a grid plus declared limits at `0⁺` and `+∞`.
fn scale_elasticity_samples(scale: &ScaleCurve, u_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let mut samples = Vec::with_capacity(u_grid.len() + 2);
    for &u in u_grid {
        samples.push((u, scale.elasticity(u)?));
    }
    if let Some(f0) = scale.elasticity_at_zero() {
        samples.push((0.0, f0));
    }
    if let Some(finf) = scale.elasticity_at_infinity() {
        samples.push((f64::INFINITY, finf));
    }
    Ok(samples)
}

/// Supremum estimates of the positive/negative parts of `F` and `f`.
pub fn compact_bounds(
    shape: &SmileShape,
    scale: &ScaleCurve,
    z_grid: &[f64],
    u_grid: &[f64],
) -> Result<CompactBounds> {
    let f_samples = shape_elasticity_samples(shape, z_grid);
    let s_samples = scale_elasticity_samples(scale, u_grid)?;
    let fold = |acc: (f64, f64), v: f64| (acc.0.max(v), acc.1.max(-v));
    let (sup_shape_pos, sup_shape_neg) = f_samples.iter().map(|&(_, v)| v).fold((0.0, 0.0), fold);
    let (sup_scale_pos, sup_scale_neg) = s_samples.iter().map(|&(_, v)| v).fold((0.0, 0.0), fold);
    Ok(CompactBounds {
        sup_shape_pos,
        sup_shape_neg,
        sup_scale_pos,
        sup_scale_neg,
        margins: (
            1.0 - sup_shape_pos * sup_scale_neg,
            1.0 - sup_shape_neg * sup_scale_pos,
        ),
    })
}

/// Full calendar-spread check of a surface on explicit grids.
///
/// The time grid drives the θ-monotonicity part; `z_grid`/`u_grid` drive the
/// coupling part. Errors when the variance grid exceeds `θ_∞`.
pub fn check_calendar(
    surface: &Surface,
    z_grid: &[f64],
    u_grid: &[f64],
    t_grid: &[f64],
    tol: f64,
) -> Result<CalendarVerdict> {
    let theta_inf = surface.theta.infinity();
    if let Some(&u_max) = u_grid.last()
        && theta_inf.is_finite()
        && u_max >= theta_inf
    {
        return Err(GsviError::grid(format!(
            "variance grid reaches {u_max}, beyond theta_infinity = {theta_inf}"
        )));
    }

    let mut witnesses = Vec::new();

    let mut theta_monotone = true;
    for &t in t_grid {
        let slope = surface.theta.deriv(t);
        if slope < -tol {
            theta_monotone = false;
            witnesses.push(CalendarWitness::Theta { t, value: slope });
            break;
        }
    }

    // The coupling margin over a product grid is attained at extreme values
    // of each factor, so only the four corner combinations matter.
    let f_samples = shape_elasticity_samples(&surface.shape, z_grid);
    let s_samples = scale_elasticity_samples(&surface.scale, u_grid)?;
    let extreme = |samples: &[(f64, f64)], want_max: bool| {
        samples
            .iter()
            .copied()
            .reduce(|a, b| if (b.1 > a.1) == want_max { b } else { a })
            .expect("non-empty grid")
    };
    let f_min = extreme(&f_samples, false);
    let f_max = extreme(&f_samples, true);
    let s_min = extreme(&s_samples, false);
    let s_max = extreme(&s_samples, true);
    let mut coupling_margin = f64::INFINITY;
    let mut worst = (0.0, 0.0);
    for &(z, fv) in &[f_min, f_max] {
        for &(u, sv) in &[s_min, s_max] {
            let margin = 1.0 + fv * sv;
            if margin < coupling_margin {
                coupling_margin = margin;
                worst = (z, u);
            }
        }
    }
    if coupling_margin < -tol {
        witnesses.push(CalendarWitness::Coupling {
            z: worst.0,
            u: worst.1,
            value: coupling_margin,
        });
    }

    let uphi_monotone = if surface.shape.is_asymptotically_linear() {
        Some(product_monotone(&surface.scale, u_grid, tol)?.pass)
    } else {
        None
    };

    Ok(CalendarVerdict {
        pass: theta_monotone && coupling_margin >= -tol,
        theta_monotone,
        coupling_margin,
        compact_margins: compact_bounds(&surface.shape, &surface.scale, z_grid, u_grid)?.margins,
        uphi_monotone,
        witnesses,
    })
}

/// Calendar check on the default grids.
pub fn check_calendar_default(surface: &Surface, t_grid: &[f64]) -> Result<CalendarVerdict> {
    check_calendar(
        surface,
        &default_z_grid(),
        &default_u_grid(surface.theta.infinity()),
        t_grid,
        MARGIN_TOL,
    )
}

/// Verdict of the product-monotonicity check `u ↦ u·φ(u)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProductMonotone {
    pub pass: bool,
    /// Worst value of `d/du [u·φ(u)] = φ(u)·(1 + f(u))` on the grid.
    pub worst_derivative: f64,
    /// Worst value of `1 + f(u)` on the grid (the margin actually tested).
    pub worst_margin: f64,
    /// Location of the worst margin.
    pub witness_u: f64,
}

/// Necessary (and, for symmetric SVI, sufficient) condition: `u·φ(u)`
/// non-decreasing, tested through `1 + f(u) ≥ −tol` on the grid.
pub fn product_monotone(scale: &ScaleCurve, u_grid: &[f64], tol: f64) -> Result<ProductMonotone> {
    let mut worst_margin = f64::INFINITY;
    let mut worst_derivative = f64::INFINITY;
    let mut witness_u = f64::NAN;
    for &u in u_grid {
        let margin = 1.0 + scale.elasticity(u)?;
        if margin < worst_margin {
            worst_margin = margin;
            witness_u = u;
        }
        worst_derivative = worst_derivative.min(scale.product_deriv(u)?);
    }
    if let Some(finf) = scale.elasticity_at_infinity() {
        let margin = 1.0 + finf;
        if margin < worst_margin {
            worst_margin = margin;
            witness_u = f64::INFINITY;
        }
    }
    Ok(ProductMonotone {
        pass: worst_margin >= -tol,
        worst_derivative,
        worst_margin,
        witness_u,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shape::SmileShape;
    use crate::theta::ThetaCurve;
    use approx::assert_abs_diff_eq;

    fn t_grid() -> Vec<f64> {
        num::linspace(0.01, 10.0, 101)
    }

    #[test]
    fn kinked_preset_is_calendar_free() {
        let surface = Surface::sqrt_kink_preset();
        let verdict = check_calendar_default(&surface, &t_grid()).unwrap();
        assert!(verdict.pass, "{verdict:?}");
        assert!(verdict.theta_monotone);
        assert!(verdict.witnesses.is_empty());
        assert_eq!(verdict.uphi_monotone, Some(true));
        // F ∈ [0, 1), f ∈ (−1, 0]: the margin approaches 0 through the limits
        assert!(verdict.coupling_margin >= -MARGIN_TOL);
        assert!(verdict.coupling_margin < 1e-9);
    }

    #[test]
    fn decreasing_theta_fails_condition_one() {
        // decreasing ATM variance; its attainable range is (0, 1)
        let surface = Surface::new(
            SmileShape::svi(0.0).unwrap(),
            ScaleCurve::decay(1.0).unwrap(),
            ThetaCurve::custom(|t: f64| (-t).exp(), |t: f64| -(-t).exp(), 1.0),
        );
        let verdict = check_calendar(
            &surface,
            &default_z_grid(),
            &num::logspace(1e-3, 0.9, 50),
            &t_grid(),
            MARGIN_TOL,
        )
        .unwrap();
        assert!(!verdict.pass);
        assert!(!verdict.theta_monotone);
        assert!(matches!(
            verdict.witnesses[0],
            CalendarWitness::Theta { .. }
        ));
    }

    #[test]
    fn steep_power_scale_fails_coupling_with_margin_minus_one() {
        // symmetric SVI with φ(u) = u⁻²: f ≡ −2, sup F₊ = 1 ⇒ inf margin = −1
        let surface = Surface::new(
            SmileShape::svi(0.0).unwrap(),
            ScaleCurve::power(1.0, 2.0).unwrap(),
            ThetaCurve::linear(1.0).unwrap(),
        );
        let verdict = check_calendar_default(&surface, &t_grid()).unwrap();
        assert!(!verdict.pass);
        assert!(verdict.theta_monotone);
        assert_abs_diff_eq!(verdict.coupling_margin, -1.0, epsilon = 1e-9);
        assert!(matches!(
            verdict.witnesses[0],
            CalendarWitness::Coupling { .. }
        ));
    }

    #[test]
    fn symmetric_svi_compact_suprema() {
        let shape = SmileShape::svi(0.0).unwrap();
        let scale = ScaleCurve::decay(1.0).unwrap();
        let bounds = compact_bounds(
            &shape,
            &scale,
            &default_z_grid(),
            &default_u_grid(f64::INFINITY),
        )
        .unwrap();
        assert_eq!(bounds.sup_shape_pos, 1.0);
        assert_eq!(bounds.sup_shape_neg, 0.0);
        assert_eq!(bounds.sup_scale_pos, 0.0);
        assert_eq!(bounds.sup_scale_neg, 1.0);
        assert_abs_diff_eq!(bounds.margins.0, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bounds.margins.1, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_scale_has_unit_margins() {
        let shape = SmileShape::svi(0.3).unwrap();
        let scale = ScaleCurve::constant(0.5).unwrap();
        let bounds = compact_bounds(
            &shape,
            &scale,
            &default_z_grid(),
            &default_u_grid(f64::INFINITY),
        )
        .unwrap();
        assert_eq!(bounds.sup_scale_pos, 0.0);
        assert_eq!(bounds.sup_scale_neg, 0.0);
        assert_eq!(bounds.margins, (1.0, 1.0));
    }

    #[test]
    fn product_monotonicity_examples() {
        let grid = default_u_grid(f64::INFINITY);
        // u·φ(u) = 1 − e^{-u}: increasing, limit margin 0
        let decay = ScaleCurve::decay(1.0).unwrap();
        let res = product_monotone(&decay, &grid, MARGIN_TOL).unwrap();
        assert!(res.pass);
        assert!(res.worst_margin.abs() < 1e-9);
        // u·φ(u) = 1/u: decreasing
        let invsq = ScaleCurve::power(1.0, 2.0).unwrap();
        let res = product_monotone(&invsq, &grid, MARGIN_TOL).unwrap();
        assert!(!res.pass);
        assert_abs_diff_eq!(res.worst_margin, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn coupling_margin_consistent_with_compact_margins() {
        // the two formulations agree in sign on the tested grids
        let cases: Vec<(SmileShape, ScaleCurve)> = vec![
            (
                SmileShape::svi(0.0).unwrap(),
                ScaleCurve::decay(1.0).unwrap(),
            ),
            (
                SmileShape::svi(0.4).unwrap(),
                ScaleCurve::power(1.0, 0.5).unwrap(),
            ),
            (
                SmileShape::sqrt_kink(),
                ScaleCurve::power(1.0, 1.5).unwrap(),
            ),
            (
                SmileShape::power_law(2.5).unwrap(),
                ScaleCurve::constant(2.0).unwrap(),
            ),
        ];
        for (shape, scale) in cases {
            let surface = Surface::new(shape, scale, ThetaCurve::linear(1.0).unwrap());
            let verdict = check_calendar_default(&surface, &t_grid()).unwrap();
            let compact_ok = verdict.compact_margins.0 >= -MARGIN_TOL
                && verdict.compact_margins.1 >= -MARGIN_TOL;
            assert_eq!(
                verdict.coupling_margin >= -MARGIN_TOL,
                compact_ok,
                "disagreement for {surface:?}"
            );
        }
    }

    #[test]
    fn grid_beyond_theta_infinity_is_rejected() {
        let surface = Surface::new(
            SmileShape::svi(0.0).unwrap(),
            ScaleCurve::decay(1.0).unwrap(),
            ThetaCurve::saturating(0.5, 1.0).unwrap(),
        );
        let bad = num::logspace(1e-3, 1.0, 20);
        assert!(check_calendar(&surface, &default_z_grid(), &bad, &t_grid(), MARGIN_TOL).is_err());
        let good = default_u_grid(0.5);
        assert!(check_calendar(&surface, &default_z_grid(), &good, &t_grid(), MARGIN_TOL).is_ok());
    }

    #[test]
    fn atm_coupling_is_always_unit() {
        // F(0) = 0 ⇒ 1 + F(0)·f(u) = 1 whatever the scale does
        let shape = SmileShape::svi(-0.6).unwrap();
        assert_eq!(shape.elasticity(0.0).unwrap(), 0.0);
        for scale in [
            ScaleCurve::power(1.0, 5.0).unwrap(),
            ScaleCurve::decay(2.0).unwrap(),
        ] {
            let f = scale.elasticity(1.0).unwrap();
            assert_eq!(1.0 + shape.elasticity(0.0).unwrap() * f, 1.0);
        }
    }
}
