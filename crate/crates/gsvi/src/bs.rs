//! Black-Scholes primitives, the density operator on a variance slice,
//! Dupire local variance and brute-force arbitrage oracles.
//!
//! Conventions throughout: spot 1, zero rates, so strike `K = e^k`. For total
//! variance `w` the Black-Scholes d-values are `d± = −k/√w ± √w/2`.
//!
//! The density operator on a slice `v` is
//!
//! ```text
//! g(k) = (1 − k·v'/(2v))² − (v')²/4 · (1/v + 1/4) + v''/2
//! ```
//!
//! whose sign is the sign of the implied risk-neutral density. On a kinked
//! slice the classical value exists off the kinks and each kink adds a point
//! mass of `Δv'/2` at its position (distributional second derivative of the
//! one-sided slopes).

use serde::Serialize;

use crate::error::{GsviError, Result};
use crate::shape::Side;
use crate::surface::{Surface, VarianceSlice};

/// Standard normal CDF via the complementary error function, accurate to ~1e-15.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Black-Scholes `d± = −k/√w ± √w/2`; errors for `w ≤ 0`.
///
/// The identity `d₋ = d₊ − √w` holds by construction.
pub fn d_pm(k: f64, w: f64) -> Result<(f64, f64)> {
    if w.is_nan() || w <= 0.0 {
        return Err(GsviError::domain(format!(
            "d± need positive total variance, got w = {w}"
        )));
    }
    let s = w.sqrt();
    let base = -k / s;
    Ok((base + 0.5 * s, base - 0.5 * s))
}

/// Black-Scholes call price for strike `K > 0` and total variance `w ≥ 0`
/// (spot 1, zero rates). `w = 0` returns the intrinsic value `(1 − K)₊`.
pub fn call_price(strike: f64, w: f64) -> Result<f64> {
    if strike.is_nan() || strike <= 0.0 {
        return Err(GsviError::domain(format!(
            "call price needs K > 0, got {strike}"
        )));
    }
    if w < 0.0 {
        return Err(GsviError::domain(format!(
            "call price needs w >= 0, got {w}"
        )));
    }
    if w == 0.0 {
        return Ok((1.0 - strike).max(0.0));
    }
    let (d_plus, d_minus) = d_pm(strike.ln(), w)?;
    Ok(norm_cdf(d_plus) - strike * norm_cdf(d_minus))
}

/// Black-Scholes put price `K·N(−d₋) − N(−d₊)` (spot 1, zero rates).
///
/// Equals `call − 1 + K` by parity, so puts and calls share the same strike
/// convexity; the put form avoids the `1 − K` cancellation that destroys
/// second differences of deep-in-the-money calls.
pub fn put_price(strike: f64, w: f64) -> Result<f64> {
    if strike.is_nan() || strike <= 0.0 {
        return Err(GsviError::domain(format!(
            "put price needs K > 0, got {strike}"
        )));
    }
    if w < 0.0 {
        return Err(GsviError::domain(format!(
            "put price needs w >= 0, got {w}"
        )));
    }
    if w == 0.0 {
        return Ok((strike - 1.0).max(0.0));
    }
    let (d_plus, d_minus) = d_pm(strike.ln(), w)?;
    Ok(strike * norm_cdf(-d_minus) - norm_cdf(-d_plus))
}

/// Pointwise density operator `g` at `k`; errors on a kink of the slice.
pub fn g_value(slice: &VarianceSlice, k: f64) -> Result<f64> {
    if slice.is_kink(k) {
        return Err(GsviError::AtKnot {
            z: k * slice.scale(),
        });
    }
    Ok(g_sided(slice, k, Side::Right))
}

/// One-sided density operator, defined at kinks as the one-sided limit.
pub fn g_sided(slice: &VarianceSlice, k: f64, side: Side) -> f64 {
    let v = slice.value(k);
    let vp = slice.deriv_side(k, side);
    let vpp = slice.deriv2_side(k, side);
    let half_ratio = 1.0 - k * vp / (2.0 * v);
    half_ratio * half_ratio - 0.25 * vp * vp * (1.0 / v + 0.25) + 0.5 * vpp
}

/// The density operator written in the rescaled variable `z = k·φ(θ)`:
///
/// ```text
/// g = (1 − z·Ψ'/(2Ψ))² − (θφ)² · [ (Ψ'²/Ψ − 2Ψ'')/(4θ) + Ψ'²/16 ]
/// ```
///
/// Algebraically identical to [`g_sided`] but evaluated through the shape
/// functions directly; kept as a second arithmetic route for cross-checks.
pub fn g_sided_rescaled(slice: &VarianceSlice, k: f64, side: Side) -> f64 {
    let shape = slice.shape();
    let z = slice.rescaled_coord(k);
    let z_side = slice.shape_side(side);
    let psi = shape.value(z);
    let dpsi = shape.deriv_side(z, z_side);
    let d2psi = shape.deriv2_side(z, z_side);
    let theta = slice.theta();
    let tp = theta * slice.scale();
    let num = 1.0 - z * dpsi / (2.0 * psi);
    num * num - tp * tp * ((dpsi * dpsi / psi - 2.0 * d2psi) / (4.0 * theta) + dpsi * dpsi / 16.0)
}

/// A point mass of the density operator, induced by a kink of the slice.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GAtom {
    /// Log-moneyness of the atom.
    pub k: f64,
    /// Jump of `v'` across the kink.
    pub slope_jump: f64,
    /// Mass contributed to `g` as a distribution: `slope_jump/2`.
    pub mass: f64,
}

/// Pointwise part of [`GResult`].
#[derive(Debug, Clone, Copy)]
pub enum GPointwise {
    /// Classical value away from kinks.
    Value(f64),
    /// Both one-sided values when the point sits exactly on a kink.
    AtKink { left: f64, right: f64 },
}

/// Density operator at a point together with the slice's point masses.
#[derive(Debug, Clone)]
pub struct GResult {
    pub pointwise: GPointwise,
    pub atoms: Vec<GAtom>,
}

/// Point masses of the slice's density operator, one per kink.
pub fn g_atoms(slice: &VarianceSlice) -> Vec<GAtom> {
    slice
        .kinks()
        .iter()
        .map(|kink| GAtom {
            k: kink.k,
            slope_jump: kink.slope_jump,
            mass: 0.5 * kink.slope_jump,
        })
        .collect()
}

/// Full density-operator evaluation at `(k, t)`: pointwise value (one-sided on
/// both sides when `k` is a kink) plus the slice's atoms.
pub fn g_result(surface: &Surface, k: f64, t: f64) -> Result<GResult> {
    let slice = surface.slice(t)?;
    let pointwise = if slice.is_kink(k) {
        GPointwise::AtKink {
            left: g_sided(&slice, k, Side::Left),
            right: g_sided(&slice, k, Side::Right),
        }
    } else {
        GPointwise::Value(g_value(&slice, k)?)
    };
    Ok(GResult {
        pointwise,
        atoms: g_atoms(&slice),
    })
}

/// Dupire local variance `σ²_loc(k, t) = ∂_t w / g`.
///
/// A non-positive denominator is reported as arbitrage, not as a numeric
/// failure.
pub fn local_variance(surface: &Surface, k: f64, t: f64) -> Result<f64> {
    let slice = surface.slice(t)?;
    let g = g_value(&slice, k)?;
    if g <= 0.0 {
        return Err(GsviError::arbitrage(format!(
            "density operator non-positive at (k={k}, t={t}): g = {g}"
        )));
    }
    Ok(surface.partials(k, t)?.d_t / g)
}

/// Grid description attached to an [`OracleReport`].
#[derive(Debug, Clone, Serialize)]
pub struct GridSpec {
    pub kind: &'static str,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

/// Result of a brute-force price-level scan.
///
/// `min_margin ≥ −tol` certifies the scanned condition on the grid; the
/// witness locates the worst point.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub min_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_k: Option<f64>,
    #[serde(rename = "witness_K", skip_serializing_if = "Option::is_none")]
    pub witness_strike: Option<f64>,
    pub witness_t: f64,
    pub grid: GridSpec,
}

impl OracleReport {
    /// Pass/fail at tolerance `tol` (margins below `−tol` fail).
    pub fn passes(&self, tol: f64) -> bool {
        self.min_margin >= -tol
    }
}

/// Default strike grid: 2001 log-spaced strikes on `[e⁻⁵, e⁵]`.
pub fn default_strike_grid() -> Vec<f64> {
    crate::num::logspace((-5.0_f64).exp(), 5.0_f64.exp(), 2001)
}

/// Default time grid: 101 equally spaced maturities on `[0.01, 10]`.
pub fn default_time_grid() -> Vec<f64> {
    crate::num::linspace(0.01, 10.0, 101)
}

/// Brute-force convexity check of `K ↦ C_BS(K, w(log K, t))`.
///
/// Scans second divided differences on the strike grid; a negative margin is
/// a butterfly violation witnessed at that strike. Differences run over put
/// prices, whose second derivative is the same density by parity but whose
/// wings retain full relative precision.
pub fn convexity_oracle(surface: &Surface, t: f64, strikes: &[f64]) -> Result<OracleReport> {
    if strikes.len() < 3 {
        return Err(GsviError::grid("convexity oracle needs at least 3 strikes"));
    }
    if strikes.windows(2).any(|w| w[0] >= w[1]) || strikes[0] <= 0.0 {
        return Err(GsviError::grid(
            "strike grid must be positive and strictly increasing",
        ));
    }
    let mut prices = Vec::with_capacity(strikes.len());
    for &strike in strikes {
        let w = surface.total_variance(strike.ln(), t)?;
        prices.push(put_price(strike, w)?);
    }
    let mut min_margin = f64::INFINITY;
    let mut witness = strikes[1];
    for i in 1..strikes.len() - 1 {
        let left = (prices[i] - prices[i - 1]) / (strikes[i] - strikes[i - 1]);
        let right = (prices[i + 1] - prices[i]) / (strikes[i + 1] - strikes[i]);
        let second = (right - left) / (strikes[i + 1] - strikes[i - 1]);
        if second < min_margin {
            min_margin = second;
            witness = strikes[i];
        }
    }
    Ok(OracleReport {
        min_margin,
        witness_k: None,
        witness_strike: Some(witness),
        witness_t: t,
        grid: GridSpec {
            kind: "log_strike",
            min: strikes[0],
            max: *strikes.last().unwrap(),
            n: strikes.len(),
        },
    })
}

/// Brute-force maturity-monotonicity check of `t ↦ w(k, t)`.
///
/// Scans forward differences on the time grid; a negative margin is a
/// calendar-spread violation witnessed at the left end of the failing step.
pub fn monotonicity_oracle(surface: &Surface, k: f64, times: &[f64]) -> Result<OracleReport> {
    if times.len() < 2 {
        return Err(GsviError::grid(
            "monotonicity oracle needs at least 2 times",
        ));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) || times[0] <= 0.0 {
        return Err(GsviError::grid(
            "time grid must be positive and strictly increasing",
        ));
    }
    let values: Vec<f64> = times
        .iter()
        .map(|&t| surface.total_variance(k, t))
        .collect::<Result<_>>()?;
    let mut min_margin = f64::INFINITY;
    let mut witness = times[0];
    for i in 0..times.len() - 1 {
        let diff = values[i + 1] - values[i];
        if diff < min_margin {
            min_margin = diff;
            witness = times[i];
        }
    }
    Ok(OracleReport {
        min_margin,
        witness_k: Some(k),
        witness_strike: None,
        witness_t: witness,
        grid: GridSpec {
            kind: "time",
            min: times[0],
            max: *times.last().unwrap(),
            n: times.len(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::ScaleCurve;
    use crate::shape::SmileShape;
    use crate::theta::ThetaCurve;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_cdf_reference_values() {
        assert_abs_diff_eq!(norm_cdf(0.0), 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(norm_cdf(1.0), 0.841344746068543, epsilon = 1e-15);
        assert_abs_diff_eq!(norm_cdf(-1.0), 1.0 - norm_cdf(1.0), epsilon = 1e-16);
        // deep tail keeps relative precision through erfc
        assert_abs_diff_eq!(norm_cdf(-8.0) / 6.22096057427178e-16, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn d_values_and_their_identity() {
        let (dp, dm) = d_pm(0.0, 4.0).unwrap();
        assert_eq!((dp, dm), (1.0, -1.0));
        let (dp, dm) = d_pm(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(dp, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(dm, -1.5, epsilon = 1e-15);
        for &(k, w) in &[(0.3, 0.7), (-2.0, 4.2), (11.0, 0.03)] {
            let (dp, dm) = d_pm(k, w).unwrap();
            assert_abs_diff_eq!(dm, dp - w.sqrt(), epsilon = 1e-12);
        }
        assert!(d_pm(1.0, 0.0).is_err());
        assert!(d_pm(1.0, -1.0).is_err());
    }

    #[test]
    fn call_price_reference_values() {
        assert_eq!(call_price(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(call_price(0.25, 0.0).unwrap(), 0.75);
        // C(1, 4) = 2N(1) − 1
        assert_abs_diff_eq!(
            call_price(1.0, 4.0).unwrap(),
            2.0 * norm_cdf(1.0) - 1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(call_price(1.0, 4.0).unwrap(), 0.68269, epsilon = 1e-5);
        // huge variance drives the call to the spot
        assert_abs_diff_eq!(call_price(1.0, 1e4).unwrap(), 1.0, epsilon = 1e-12);
        assert!(call_price(0.0, 1.0).is_err());
        assert!(call_price(1.0, -0.1).is_err());
    }

    #[test]
    fn put_call_parity() {
        for &(strike, w) in &[(0.5_f64, 0.8), (1.0, 2.0), (7.0, 0.4), (0.01, 1.3)] {
            let call = call_price(strike, w).unwrap();
            let put = put_price(strike, w).unwrap();
            assert_abs_diff_eq!(call - put, 1.0 - strike, epsilon = 1e-12);
        }
        assert_eq!(put_price(2.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn g_operator_two_routes_agree() {
        let surfaces = [
            Surface::svi_preset(0.0, 1.0).unwrap(),
            Surface::svi_preset(-0.6, 0.8).unwrap(),
            Surface::sqrt_kink_preset(),
            Surface::power_law_preset(3.5, 1.0).unwrap(),
        ];
        for surface in &surfaces {
            for &t in &[0.3, 1.0, 4.0] {
                let slice = surface.slice(t).unwrap();
                for &k in &[-6.0, -1.2, 0.4, 2.0, 9.0] {
                    let direct = g_sided(&slice, k, crate::shape::Side::Right);
                    let rescaled = g_sided_rescaled(&slice, k, crate::shape::Side::Right);
                    assert!(
                        (direct - rescaled).abs() <= 1e-10 * direct.abs().max(1.0),
                        "routes disagree at (k={k}, t={t}): {direct} vs {rescaled}"
                    );
                }
            }
        }
    }

    #[test]
    fn g_operator_matches_numeric_partials() {
        // the defining form evaluated with finite-difference partials
        let surface = Surface::sqrt_kink_preset();
        let slice = surface.slice(1.0).unwrap();
        let t = 1.0;
        for &k in &[-4.0, -0.7, 0.9, 3.0] {
            let h = 1e-5;
            let w0 = surface.total_variance(k, t).unwrap();
            let wp = (surface.total_variance(k + h, t).unwrap()
                - surface.total_variance(k - h, t).unwrap())
                / (2.0 * h);
            let h2 = 5e-4;
            let wpp = (surface.total_variance(k + h2, t).unwrap() - 2.0 * w0
                + surface.total_variance(k - h2, t).unwrap())
                / (h2 * h2);
            let half = 1.0 - k * wp / (2.0 * w0);
            let numeric = half * half - 0.25 * wp * wp * (1.0 / w0 + 0.25) + 0.5 * wpp;
            let analytic = g_value(&slice, k).unwrap();
            assert!(
                (numeric - analytic).abs() / analytic.abs().max(1e-6) < 1e-5,
                "numeric-partials route at k={k}: {numeric} vs {analytic}"
            );
        }
    }

    #[test]
    fn atm_g_for_flat_symmetric_slice() {
        // Ψ'(0) = 0 kills the slope terms: g(0) = 1 + (θφ)²·Ψ''(0)/(2θ)
        let surface = Surface::new(
            SmileShape::svi(0.0).unwrap(),
            ScaleCurve::constant(1.0).unwrap(),
            ThetaCurve::linear(1.0).unwrap(),
        );
        for &t in &[0.5, 1.0, 2.0] {
            let slice = surface.slice(t).unwrap();
            let g = g_value(&slice, 0.0).unwrap();
            let expected = 1.0 + t * 0.5 / 2.0; // θφ = t, Ψ''(0) = 1/2
            assert_abs_diff_eq!(g, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn kink_reports_both_sides_and_atom() {
        let surface = Surface::sqrt_kink_preset();
        let result = g_result(&surface, 0.0, 1.0).unwrap();
        match result.pointwise {
            GPointwise::AtKink { left, right } => {
                // the slope enters squared, so both sides coincide here
                assert_abs_diff_eq!(left, right, epsilon = 1e-10);
            }
            GPointwise::Value(_) => panic!("origin is a kink"),
        }
        assert_eq!(result.atoms.len(), 1);
        let c = 1.0 - (-1.0_f64).exp();
        assert_eq!(result.atoms[0].k, 0.0);
        assert_abs_diff_eq!(result.atoms[0].slope_jump, 2.5 * c, epsilon = 1e-14);
        assert_abs_diff_eq!(result.atoms[0].mass, 1.25 * c, epsilon = 1e-14);
        // off the kink the pointwise value is classical
        assert!(matches!(
            g_result(&surface, 0.5, 1.0).unwrap().pointwise,
            GPointwise::Value(_)
        ));
    }

    #[test]
    fn pointwise_g_nonnegative_for_kinked_preset() {
        let surface = Surface::sqrt_kink_preset();
        for &t in &[0.1, 1.0, 5.0] {
            let slice = surface.slice(t).unwrap();
            for &k in crate::num::linspace(-10.0, 10.0, 401).iter() {
                if slice.is_kink(k) {
                    continue;
                }
                assert!(g_value(&slice, k).unwrap() >= 0.0, "g < 0 at ({k}, {t})");
            }
        }
    }

    #[test]
    fn local_variance_on_clean_and_broken_surfaces() {
        // ATM: numerator is θ', so σ²_loc(0, t) = θ'/g(0, t)
        let surface = Surface::svi_preset(0.0, 1.0).unwrap();
        let slice = surface.slice(1.0).unwrap();
        let expected = 1.0 / g_value(&slice, 0.0).unwrap();
        assert_abs_diff_eq!(
            local_variance(&surface, 0.0, 1.0).unwrap(),
            expected,
            epsilon = 1e-12
        );

        // arbitrage-free preset: non-negative local variance on a grid
        let surface = Surface::sqrt_kink_preset();
        for &t in &[0.5, 1.0, 3.0] {
            for &k in crate::num::linspace(-5.0, 5.0, 81).iter() {
                if surface.slice(t).unwrap().is_kink(k) {
                    continue;
                }
                assert!(local_variance(&surface, k, t).unwrap() >= 0.0);
            }
        }

        // decreasing theta: negative numerator at every strike
        let broken = Surface::new(
            SmileShape::svi(0.0).unwrap(),
            ScaleCurve::decay(1.0).unwrap(),
            ThetaCurve::custom(|t: f64| (-t).exp(), |t: f64| -(-t).exp(), 1.0),
        );
        for &k in &[-1.0, 0.0, 2.0] {
            assert!(broken.partials(k, 1.0).unwrap().d_t < 0.0);
        }
    }

    #[test]
    fn wing_asymptotics_of_d_values() {
        let surface = Surface::sqrt_kink_preset();
        for &t in &[0.5, 1.0, 5.0] {
            // d₋ ≤ −√(2k) on the right wing, d₊ ≥ √(−2k) on the left wing
            for &k in &[10.0, 100.0] {
                let w = surface.total_variance(k, t).unwrap();
                let (_, dm) = d_pm(k, w).unwrap();
                assert!(dm <= -(2.0 * k).sqrt() + 1e-12);
                let w = surface.total_variance(-k, t).unwrap();
                let (dp, _) = d_pm(-k, w).unwrap();
                assert!(dp >= (2.0 * k).sqrt() - 1e-12);
            }
            // with θφ(θ)·α₊ < 2 the call wing dies: d₊ decreasing at large k
            let w3 = surface.total_variance(1e3, t).unwrap();
            let w4 = surface.total_variance(1e4, t).unwrap();
            let (dp3, _) = d_pm(1e3, w3).unwrap();
            let (dp4, _) = d_pm(1e4, w4).unwrap();
            assert!(dp4 < dp3);
        }
    }

    #[test]
    fn oracles_on_clean_and_broken_surfaces() {
        let surface = Surface::sqrt_kink_preset();
        let report = convexity_oracle(&surface, 1.0, &default_strike_grid()).unwrap();
        assert!(report.passes(1e-10), "margin {}", report.min_margin);
        let report = monotonicity_oracle(&surface, 0.0, &default_time_grid()).unwrap();
        assert!(report.passes(1e-10));

        let broken = Surface::new(
            SmileShape::svi(0.0).unwrap(),
            ScaleCurve::decay(1.0).unwrap(),
            ThetaCurve::custom(|t: f64| (-t).exp(), |t: f64| -(-t).exp(), 1.0),
        );
        let report = monotonicity_oracle(&broken, 0.0, &default_time_grid()).unwrap();
        assert!(!report.passes(1e-10));
        assert!(report.witness_k.is_some());

        // grid validation
        assert!(convexity_oracle(&surface, 1.0, &[1.0, 2.0]).is_err());
        assert!(monotonicity_oracle(&surface, 0.0, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn oracle_report_serialises_with_fixed_keys() {
        let surface = Surface::sqrt_kink_preset();
        let report = convexity_oracle(&surface, 1.0, &default_strike_grid()).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert!(json.get("min_margin").is_some());
        assert!(json.get("witness_K").is_some());
        assert!(json.get("witness_k").is_none());
        assert!(json.get("witness_t").is_some());
        assert_eq!(json["grid"]["n"], 2001);
    }
}
