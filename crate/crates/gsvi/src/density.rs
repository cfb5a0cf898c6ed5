//! Risk-neutral density extraction, inverse-CDF sampling and critical moments.
//!
//! For an arbitrage-free slice `v` the density of log-moneyness under the
//! call-price measure is
//!
//! ```text
//! p₋(k) = (2π·v(k))^(-1/2) · exp(−d₋(k, v(k))²/2) · g(k),
//! ```
//!
//! with `g` the density operator of [`crate::bs`]; a companion density
//! `p₊(k) = e^k·p₋(k)` integrates to one as well, which is the martingale
//! property `E[e^k] = 1`. Each kink of the slice adds a point mass
//! `(Δv'/2)·(2πv)^(-1/2)·e^(−d₋²/2)` at its position — the jump of the
//! call-price delta across the kink.
//!
//! The critical moment `sup{m ≥ 0 : E[X^(1+m)] < ∞}` of the underlying
//! `X = e^k` follows from the right wing slope `α = lim v'(k)` through
//! `m*(α) = (α/4 − 1 + 1/α)/2`, valid for `α ∈ (0, 2)`; a quadrature bracket
//! on expanding domains provides an independent estimate.

use serde::Serialize;

use crate::bs::{self, d_pm};
use crate::error::{GsviError, Result};
use crate::num;
use crate::shape::Side;
use crate::surface::{Surface, VarianceSlice};

/// Tolerance on normalisation and martingale integrals.
pub const MASS_TOL: f64 = 1e-4;

/// A point mass of the extracted density.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DensityAtom {
    /// Log-moneyness of the atom.
    pub k: f64,
    /// Probability mass.
    pub mass: f64,
}

/// Sampled risk-neutral density of a slice with its distribution function.
#[derive(Debug, Clone)]
pub struct DensitySlice {
    /// Maturity of the slice.
    pub t: f64,
    /// Sample grid in log-moneyness, strictly increasing.
    pub k_grid: Vec<f64>,
    /// Continuous density `p₋` on the grid.
    pub p_minus: Vec<f64>,
    /// Companion density `p₊(k) = e^k·p₋(k)`, evaluated independently.
    pub p_plus: Vec<f64>,
    /// Point masses from slice kinks.
    pub atoms: Vec<DensityAtom>,
    /// Cumulative distribution (trapezoid plus atom steps) at the grid points.
    pub cdf: Vec<f64>,
    /// Total mass including atoms and wing estimates.
    pub mass: f64,
    /// `∫ e^k dP`, including atoms and wing estimates.
    pub mean_exp: f64,
}

/// Continuous part of `p₋` at a point (one-sided average on a kink).
pub fn p_minus_at(slice: &VarianceSlice, k: f64) -> f64 {
    let v = slice.value(k);
    let (_, d_minus) = d_pm(k, v).expect("positive slice");
    let g = if slice.is_kink(k) {
        0.5 * (bs::g_sided(slice, k, Side::Left) + bs::g_sided(slice, k, Side::Right))
    } else {
        bs::g_sided(slice, k, Side::Right)
    };
    bs::norm_pdf(d_minus) / v.sqrt() * g
}

/// `ln p₋(k)`, assembled in log space so far-wing evaluations do not
/// underflow. `−∞` where the density operator is non-positive.
pub fn log_p_minus_at(slice: &VarianceSlice, k: f64) -> f64 {
    let v = slice.value(k);
    let (_, d_minus) = d_pm(k, v).expect("positive slice");
    let g = if slice.is_kink(k) {
        0.5 * (bs::g_sided(slice, k, Side::Left) + bs::g_sided(slice, k, Side::Right))
    } else {
        bs::g_sided(slice, k, Side::Right)
    };
    if g <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -0.5 * d_minus * d_minus - 0.5 * (2.0 * std::f64::consts::PI * v).ln() + g.ln()
}

fn p_plus_at(slice: &VarianceSlice, k: f64) -> f64 {
    let v = slice.value(k);
    let (d_plus, _) = d_pm(k, v).expect("positive slice");
    let g = if slice.is_kink(k) {
        0.5 * (bs::g_sided(slice, k, Side::Left) + bs::g_sided(slice, k, Side::Right))
    } else {
        bs::g_sided(slice, k, Side::Right)
    };
    bs::norm_pdf(d_plus) / v.sqrt() * g
}

/// Atoms of the slice density: Gaussian prefactor times the `g` point mass.
pub fn density_atoms(slice: &VarianceSlice) -> Vec<DensityAtom> {
    slice
        .kinks()
        .iter()
        .filter(|kink| kink.slope_jump != 0.0)
        .map(|kink| {
            let v = slice.value(kink.k);
            let (_, d_minus) = d_pm(kink.k, v).expect("positive slice");
            DensityAtom {
                k: kink.k,
                mass: bs::norm_pdf(d_minus) / v.sqrt() * 0.5 * kink.slope_jump,
            }
        })
        .collect()
}

/// Exponential wing estimate of `∫ f` beyond the grid end, from the last two
/// tabulated values of a log-linearly decaying integrand.
fn wing_integral(x0: f64, f0: f64, x1: f64, f1: f64) -> f64 {
    if f1 <= 0.0 || f0 <= f1 {
        return 0.0;
    }
    let rate = (f0.ln() - f1.ln()) / (x1 - x0);
    if rate <= 0.0 { 0.0 } else { f1 / rate }
}

/// Extract the density of a surface slice on a grid.
///
/// Fails with an arbitrage error when the slice's density operator dips below
/// `−tol` anywhere on the grid or a kink has a negative jump, and with a
/// numerical error when the wings have not decayed by the grid ends.
pub fn extract_density(surface: &Surface, t: f64, k_grid: &[f64]) -> Result<DensitySlice> {
    if k_grid.len() < 3 || k_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(GsviError::grid(
            "density grid must be strictly increasing with at least 3 points",
        ));
    }
    let slice = surface.slice(t)?;
    let tol = 1e-9;

    // wing behaviour first: without the small/large-moneyness limits the
    // call-delta primitive does not span a unit of mass
    let diagnostics = wing_diagnostics(&slice);
    if !diagnostics.trends_ok {
        return Err(GsviError::arbitrage(format!(
            "wing behaviour inconsistent with a normalisable density: {diagnostics:?}"
        )));
    }

    for kink in slice.kinks() {
        if kink.slope_jump < -tol {
            return Err(GsviError::arbitrage(format!(
                "negative slope jump {} at k = {}: negative point mass",
                kink.slope_jump, kink.k
            )));
        }
    }

    let mut p_minus = Vec::with_capacity(k_grid.len());
    let mut p_plus = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let g = if slice.is_kink(k) {
            0.5 * (bs::g_sided(&slice, k, Side::Left) + bs::g_sided(&slice, k, Side::Right))
        } else {
            bs::g_sided(&slice, k, Side::Right)
        };
        if g < -tol {
            return Err(GsviError::arbitrage(format!(
                "density operator negative at (k = {k}, t = {t}): g = {g}"
            )));
        }
        p_minus.push(p_minus_at(&slice, k));
        p_plus.push(p_plus_at(&slice, k));
    }

    let atoms = density_atoms(&slice);

    // cumulative trapezoid with atom steps at their grid positions
    let mut cdf = Vec::with_capacity(k_grid.len());
    let mut acc = 0.0;
    for (i, &k) in k_grid.iter().enumerate() {
        if i > 0 {
            acc += 0.5 * (p_minus[i] + p_minus[i - 1]) * (k - k_grid[i - 1]);
        }
        for atom in &atoms {
            if atom.k == k || (i > 0 && k_grid[i - 1] < atom.k && atom.k < k) {
                acc += atom.mass;
            }
        }
        cdf.push(acc);
    }

    let n = k_grid.len();
    let atom_mass: f64 = atoms.iter().map(|a| a.mass).sum();
    let atom_mean: f64 = atoms.iter().map(|a| a.mass * a.k.exp()).sum();
    let left_tail = wing_integral(k_grid[1], p_minus[1], k_grid[0], p_minus[0]);
    let right_tail = wing_integral(k_grid[n - 2], p_minus[n - 2], k_grid[n - 1], p_minus[n - 1]);
    let mass = num::trapezoid(k_grid, &p_minus) + atom_mass + left_tail + right_tail;

    let e_k: Vec<f64> = k_grid
        .iter()
        .zip(&p_minus)
        .map(|(&k, &p)| k.exp() * p)
        .collect();
    let left_tail_e = wing_integral(k_grid[1], e_k[1], k_grid[0], e_k[0]);
    let right_tail_e = wing_integral(k_grid[n - 2], e_k[n - 2], k_grid[n - 1], e_k[n - 1]);
    let mean_exp = num::trapezoid(k_grid, &e_k) + atom_mean + left_tail_e + right_tail_e;

    for (name, tail) in [
        ("left mass", left_tail),
        ("right mass", right_tail),
        ("left martingale", left_tail_e),
        ("right martingale", right_tail_e),
    ] {
        if tail > 1e-3 {
            return Err(GsviError::numerical(format!(
                "{name} wing has not decayed by the grid end: estimated tail {tail:e}"
            )));
        }
    }

    Ok(DensitySlice {
        t,
        k_grid: k_grid.to_vec(),
        p_minus,
        p_plus,
        atoms,
        cdf,
        mass,
        mean_exp,
    })
}

/// Default density grid: 16001 points on `[−40, 40]`.
pub fn default_density_grid() -> Vec<f64> {
    num::linspace(-40.0, 40.0, 16001)
}

impl DensitySlice {
    /// Invert the distribution function at uniforms in `(0, 1)`.
    ///
    /// Piecewise-linear between grid points; uniforms landing inside an atom's
    /// step map exactly onto the atom position. Uniforms must lie strictly
    /// inside the unit interval.
    pub fn inverse_cdf_sample(&self, uniforms: &[f64]) -> Result<Vec<f64>> {
        if uniforms.iter().any(|&u| !(0.0 < u && u < 1.0)) {
            return Err(GsviError::domain(
                "uniforms must lie strictly inside (0, 1)",
            ));
        }
        // normalised cdf with duplicated abscissae at atom steps
        let total = *self.cdf.last().expect("non-empty grid");
        let mut xs = Vec::with_capacity(self.k_grid.len() + self.atoms.len());
        let mut cs = Vec::with_capacity(xs.capacity());
        for (i, (&k, &c)) in self.k_grid.iter().zip(&self.cdf).enumerate() {
            for atom in &self.atoms {
                if atom.k == k {
                    // entry at the pre-jump level so the step inverts flat
                    let before = (c - atom.mass) / total;
                    xs.push(k);
                    cs.push(before);
                }
            }
            let _ = i;
            xs.push(k);
            cs.push(c / total);
        }
        let samples = uniforms
            .iter()
            .map(|&u| {
                let j = cs.partition_point(|&c| c < u);
                if j == 0 {
                    return xs[0];
                }
                if j >= cs.len() {
                    return *xs.last().unwrap();
                }
                let (c0, c1) = (cs[j - 1], cs[j]);
                let (x0, x1) = (xs[j - 1], xs[j]);
                if c1 == c0 || x1 == x0 {
                    x1
                } else {
                    x0 + (x1 - x0) * (u - c0) / (c1 - c0)
                }
            })
            .collect();
        Ok(samples)
    }

    /// Median of the distribution.
    pub fn median(&self) -> f64 {
        self.inverse_cdf_sample(&[0.5])
            .expect("0.5 is a valid uniform")[0]
    }

    /// Export as CSV: header `k,p_minus,p_plus,cdf`, one row per grid point,
    /// atoms in a trailing comment block `# atom,k,mass`. 17 significant
    /// digits, `.` decimal separator.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,p_minus,p_plus,cdf\n");
        for i in 0..self.k_grid.len() {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e}\n",
                self.k_grid[i], self.p_minus[i], self.p_plus[i], self.cdf[i]
            ));
        }
        for atom in &self.atoms {
            out.push_str(&format!("# atom,{:.16e},{:.16e}\n", atom.k, atom.mass));
        }
        out
    }
}

/// Closed-form critical moment `m*(α) = (α/4 − 1 + 1/α)/2` for wing slope
/// `α ∈ (0, 2)`.
pub fn critical_moment_closed_form(alpha: f64) -> Result<f64> {
    if !(0.0 < alpha && alpha <= 2.0) {
        return Err(GsviError::domain(format!(
            "critical moment needs wing slope in (0, 2], got {alpha}"
        )));
    }
    Ok(0.5 * (alpha / 4.0 - 1.0 + 1.0 / alpha))
}

/// Critical-moment estimate of a slice.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    /// Wing slope used for the closed form: the analytic asymptote
    /// `θφ(θ)·α₊` when the shape declares its wings, otherwise the fitted
    /// slope.
    pub alpha: f64,
    /// Least-squares slope of `v` over `k ∈ [50, 200]`; biased upward by the
    /// sub-linear wing term, kept as a cross-check.
    pub alpha_fit: f64,
    /// Closed-form `m*(α)`.
    pub m_star: f64,
    /// Quadrature bracket `(lo, hi)` around the critical moment.
    pub bracket: (f64, f64),
    /// Independent estimate from the wing decay rate of `e^k·p₋`, whose
    /// asymptotic slope `(α−2)²/(8α)` is the critical moment itself.
    pub m_star_tail_rate: f64,
}

/// Least-squares slope of `−(k + ln p₋(k))` over `k ∈ [500, 2000]`: the decay
/// rate of `e^k·p₋`, converging to the critical moment from below.
fn tail_rate(slice: &VarianceSlice) -> f64 {
    let ks = num::linspace(500.0, 2000.0, 200);
    let ys: Vec<f64> = ks
        .iter()
        .map(|&k| -(k + log_p_minus_at(slice, k)))
        .collect();
    let n = ks.len() as f64;
    let kbar = ks.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (k, y) in ks.iter().zip(&ys) {
        sxx += (k - kbar) * (k - kbar);
        sxy += (k - kbar) * (y - ybar);
    }
    sxy / sxx
}

fn fitted_wing_slope(slice: &VarianceSlice) -> f64 {
    // least-squares slope of v over k ∈ [50, 200]
    let ks = num::linspace(50.0, 200.0, 151);
    let vs: Vec<f64> = ks.iter().map(|&k| slice.value(k)).collect();
    let kbar = ks.iter().sum::<f64>() / ks.len() as f64;
    let vbar = vs.iter().sum::<f64>() / vs.len() as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (k, v) in ks.iter().zip(&vs) {
        sxx += (k - kbar) * (k - kbar);
        sxy += (k - kbar) * (v - vbar);
    }
    sxy / sxx
}

/// Whether `∫ e^{(1+m)k} p₋ dk` converges, judged on doubling domains
/// `[-40, 40·2^i]`: still growing by more than 10% at the last doubling flags
/// divergence. Early doublings legitimately grow for convergent integrals
/// whose decay rate is small, so only the settled end of the sequence counts.
/// Each wing segment gets its own dense grid so resolution does not degrade
/// as the domain doubles.
fn moment_integral_converges(slice: &VarianceSlice, m: f64) -> bool {
    let segment = |lo: f64, hi: f64| -> Option<f64> {
        let ks = num::linspace(lo, hi, 2001);
        let mut acc = 0.0;
        let mut last = 0.0;
        for (j, &k) in ks.iter().enumerate() {
            let log_val = (1.0 + m) * k + log_p_minus_at(slice, k);
            if log_val > 690.0 {
                return None; // integrand overflows: clearly divergent
            }
            let val = log_val.exp();
            if j > 0 {
                acc += 0.5 * (val + last) * (ks[j] - ks[j - 1]);
            }
            last = val;
        }
        Some(acc)
    };
    let Some(mut total) = segment(-40.0, 40.0) else {
        return false;
    };
    let mut prev = total;
    let mut last_growth = f64::INFINITY;
    for i in 0..6 {
        let lo = 40.0 * f64::powi(2.0, i);
        let Some(tail) = segment(lo, 2.0 * lo) else {
            return false;
        };
        total += tail;
        last_growth = total / prev;
        prev = total;
    }
    last_growth <= 1.10
}

/// Estimate the critical moment of a slice: closed form from the fitted wing
/// slope plus an independent quadrature bracket.
///
/// Preconditions: the fitted slope must lie in `(0, 2)` and the slice
/// curvature must vanish in the wing.
pub fn critical_moment(surface: &Surface, t: f64) -> Result<MomentReport> {
    let slice = surface.slice(t)?;
    let alpha_fit = fitted_wing_slope(&slice);
    let alpha = match surface.shape.slope_pos() {
        Some(s) => slice.theta() * slice.scale() * s,
        None => alpha_fit,
    };
    if !(0.0 < alpha && alpha < 2.0) {
        return Err(GsviError::domain(format!(
            "wing slope {alpha} outside (0, 2)"
        )));
    }
    // the plain fit is biased upward by the sub-linear wing term; it still
    // has to agree with the asymptote within that bias scale
    if (alpha_fit - alpha).abs() > 0.05 {
        return Err(GsviError::numerical(format!(
            "fitted slope {alpha_fit} disagrees with asymptote {alpha}"
        )));
    }
    let curvature = slice.deriv2(200.0)?;
    if curvature.abs() > 1e-3 {
        return Err(GsviError::domain(format!(
            "slice curvature {curvature} has not vanished at k = 200"
        )));
    }
    let m_star = critical_moment_closed_form(alpha)?;

    // bisect the convergence frontier of the moment integral
    let mut lo = 0.0;
    let mut hi = 2.0;
    if !moment_integral_converges(&slice, lo) {
        return Err(GsviError::numerical(
            "moment integral diverges already at m = 0",
        ));
    }
    while hi - lo > 0.02 {
        let mid = 0.5 * (lo + hi);
        if moment_integral_converges(&slice, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    Ok(MomentReport {
        alpha,
        alpha_fit,
        m_star,
        bracket: (lo, hi),
        m_star_tail_rate: tail_rate(&slice),
    })
}

/// Wing-behaviour diagnostics of a slice.
///
/// Reports `d₋(k, v(k))` on the far left wing (should increase to +∞ when the
/// underlying puts no mass at zero), `d₊` on the far right wing (should
/// decrease to −∞ when calls vanish at large strikes), and the boundary term
/// `v'/(2√(2πv))·e^{−d₋²/2}` whose vanishing makes the call delta a genuine
/// distribution function.
#[derive(Debug, Clone, Serialize)]
pub struct WingDiagnostics {
    /// `(k, d₋(k, v(k)))` at `k = −10², −10³, −10⁴`.
    pub d_minus_left: Vec<(f64, f64)>,
    /// `(k, d₊(k, v(k)))` at `k = 10², 10³, 10⁴`.
    pub d_plus_right: Vec<(f64, f64)>,
    /// Boundary term at `±10³` and `±10⁴`.
    pub boundary_terms: Vec<(f64, f64)>,
    /// True when the `d₋` trend increases on the left and `d₊` decreases on
    /// the right.
    pub trends_ok: bool,
}

/// Evaluate the wing diagnostics of a slice.
pub fn wing_diagnostics(slice: &VarianceSlice) -> WingDiagnostics {
    let probes = [1e2, 1e3, 1e4];
    let d_minus_left: Vec<(f64, f64)> = probes
        .iter()
        .map(|&k| {
            let (_, dm) = d_pm(-k, slice.value(-k)).expect("positive slice");
            (-k, dm)
        })
        .collect();
    let d_plus_right: Vec<(f64, f64)> = probes
        .iter()
        .map(|&k| {
            let (dp, _) = d_pm(k, slice.value(k)).expect("positive slice");
            (k, dp)
        })
        .collect();
    let boundary = |k: f64| {
        let v = slice.value(k);
        let vp = if slice.is_kink(k) {
            0.5 * (slice.deriv_side(k, Side::Left) + slice.deriv_side(k, Side::Right))
        } else {
            slice.deriv_side(k, Side::Right)
        };
        let (_, dm) = d_pm(k, v).expect("positive slice");
        vp / (2.0 * v.sqrt()) * bs::norm_pdf(dm)
    };
    let boundary_terms = vec![
        (-1e4, boundary(-1e4)),
        (-1e3, boundary(-1e3)),
        (1e3, boundary(1e3)),
        (1e4, boundary(1e4)),
    ];
    let trends_ok = d_minus_left.windows(2).all(|w| w[1].1 > w[0].1)
        && d_plus_right.windows(2).all(|w| w[1].1 < w[0].1);
    WingDiagnostics {
        d_minus_left,
        d_plus_right,
        boundary_terms,
        trends_ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example_slice() -> DensitySlice {
        let surface = Surface::sqrt_kink_preset();
        extract_density(&surface, 1.0, &default_density_grid()).unwrap()
    }

    #[test]
    fn kinked_slice_mass_and_martingale_are_unit() {
        let d = example_slice();
        assert_abs_diff_eq!(d.mass, 1.0, epsilon = MASS_TOL);
        assert_abs_diff_eq!(d.mean_exp, 1.0, epsilon = MASS_TOL);
        assert_eq!(d.atoms.len(), 1);
        assert_eq!(d.atoms[0].k, 0.0);
        // atom = (Δv'/2)·(2πv)^{-1/2}·e^{-d₋²/2} with Δv' = (5/2)(1−e⁻¹)
        let c = 1.0 - (-1.0_f64).exp();
        let expected = 1.25 * c * bs::norm_pdf(-0.5);
        assert_abs_diff_eq!(d.atoms[0].mass, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(d.atoms[0].mass, 0.2781846639, epsilon = 1e-9);
    }

    #[test]
    fn power_law_slice_has_no_atom() {
        let surface = Surface::power_law_preset(3.5, 1.0).unwrap();
        let d = extract_density(&surface, 1.0, &default_density_grid()).unwrap();
        assert!(d.atoms.is_empty());
        assert_abs_diff_eq!(d.mass, 1.0, epsilon = MASS_TOL);
        assert_abs_diff_eq!(d.mean_exp, 1.0, epsilon = MASS_TOL);
    }

    #[test]
    fn companion_density_is_exponential_tilt() {
        let d = example_slice();
        for i in (0..d.k_grid.len()).step_by(400) {
            let expected = d.k_grid[i].exp() * d.p_minus[i];
            if expected > 1e-300 {
                assert!(
                    (d.p_plus[i] / expected - 1.0).abs() < 1e-12,
                    "tilt identity at k = {}",
                    d.k_grid[i]
                );
            }
        }
    }

    #[test]
    fn cdf_is_monotone_within_unit_interval() {
        let d = example_slice();
        assert!(d.cdf.windows(2).all(|w| w[1] >= w[0]));
        assert!(*d.cdf.last().unwrap() <= 1.0 + MASS_TOL);
        assert!(d.cdf[0] >= 0.0);
    }

    #[test]
    fn arbitrage_is_detected_before_extraction() {
        // decreasing theta makes the time slope negative, but the slice-level
        // check is about the density operator: use an oversized power-law
        // scale at a maturity where the density dips negative
        let surface = Surface::power_law_preset(3.5, 3.0).unwrap();
        let err = extract_density(&surface, 5.0, &default_density_grid()).unwrap_err();
        assert!(matches!(err, GsviError::Arbitrage { .. }), "{err}");
    }

    #[test]
    fn median_and_sampling_match_cdf() {
        let d = example_slice();
        let med = d.median();
        // half the mass sits left of the median
        let j = d.k_grid.partition_point(|&k| k < med);
        let total = *d.cdf.last().unwrap();
        assert!((d.cdf[j.saturating_sub(1)] / total - 0.5).abs() < 1e-3);

        // uniforms landing in the atom step return the kink exactly
        let total_cdf = *d.cdf.last().unwrap();
        let i0 = d.k_grid.partition_point(|&k| k < 0.0);
        let before = (d.cdf[i0] - d.atoms[0].mass) / total_cdf;
        let after = d.cdf[i0] / total_cdf;
        let inside = 0.5 * (before + after);
        let samples = d.inverse_cdf_sample(&[inside]).unwrap();
        assert_eq!(samples[0], 0.0);

        assert!(d.inverse_cdf_sample(&[0.0]).is_err());
        assert!(d.inverse_cdf_sample(&[1.0]).is_err());
    }

    #[test]
    fn short_maturity_samples_concentrate_at_the_money() {
        let surface = Surface::sqrt_kink_preset();
        let grid = num::linspace(-0.5, 0.5, 8001);
        let d = extract_density(&surface, 1e-4, &grid).unwrap();
        let qs = d.inverse_cdf_sample(&[0.1, 0.25, 0.5, 0.75, 0.9]).unwrap();
        for q in qs {
            assert!(q.abs() < 0.05, "quantile {q} too far from the money");
        }
    }

    #[test]
    fn closed_form_critical_moments() {
        assert_abs_diff_eq!(
            critical_moment_closed_form(2.0).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            critical_moment_closed_form(1.0).unwrap(),
            0.125,
            epsilon = 1e-15
        );
        let c = 1.0 - (-1.0_f64).exp();
        assert_abs_diff_eq!(
            critical_moment_closed_form(c).unwrap(),
            0.37000,
            epsilon = 1e-4
        );
        assert!(critical_moment_closed_form(0.0).is_err());
        assert!(critical_moment_closed_form(2.5).is_err());
    }

    #[test]
    fn moment_report_for_kinked_slice() {
        let surface = Surface::sqrt_kink_preset();
        let report = critical_moment(&surface, 1.0).unwrap();
        let c = 1.0 - (-1.0_f64).exp();
        assert_abs_diff_eq!(report.alpha, c, epsilon = 1e-12);
        // the plain fit carries the sub-linear wing bias
        assert_abs_diff_eq!(report.alpha_fit, c, epsilon = 0.05);
        assert_abs_diff_eq!(report.m_star, 0.3700, epsilon = 1e-4);
        let (lo, hi) = report.bracket;
        assert!(lo - 0.02 <= report.m_star && report.m_star <= hi + 0.02);
        assert!(hi - lo <= 0.02 + 1e-12);
        // the wing decay rate approaches m* from below
        assert_abs_diff_eq!(report.m_star_tail_rate, report.m_star, epsilon = 0.02);
        assert!(report.m_star_tail_rate < report.m_star);
    }

    #[test]
    fn wing_diagnostics_trends() {
        let surface = Surface::sqrt_kink_preset();
        let slice = surface.slice(1.0).unwrap();
        let diag = wing_diagnostics(&slice);
        assert!(diag.trends_ok, "{diag:?}");
        // d₋ ≤ −√(2k) on the right wing for any positive slice
        for &k in &[1e2, 1e3, 1e4] {
            let (_, dm) = d_pm(k, slice.value(k)).unwrap();
            assert!(dm <= -(2.0 * k).sqrt() + 1e-9);
        }
        for &(_, term) in &diag.boundary_terms {
            assert!(term.abs() <= 1e-8);
        }
    }

    #[test]
    fn reflected_density_matches_tilted_mirror() {
        // the density of the reflected slice equals p₊(−k)
        let surface = Surface::svi_preset(-0.4, 1.0).unwrap();
        let slice = surface.slice(1.0).unwrap();
        let mirror = slice.reflected();
        for &k in &[-3.0, -1.0, 0.0, 0.7, 2.5] {
            let direct = p_minus_at(&mirror, k);
            let tilted = p_plus_at(&slice, -k);
            assert_abs_diff_eq!(direct, tilted, epsilon = 1e-10);
        }
    }

    #[test]
    fn rogers_tehranchi_slope_bounds_hold_on_slices() {
        for surface in [
            Surface::sqrt_kink_preset(),
            Surface::power_law_preset(3.5, 1.0).unwrap(),
            Surface::svi_preset(0.0, 1.0).unwrap(),
        ] {
            let slice = surface.slice(1.0).unwrap();
            for &k in &[0.5, 1.0, 5.0, 20.0, 100.0] {
                let vp = slice.deriv_side(k, Side::Right);
                assert!(vp < (2.0 * slice.value(k) / k).sqrt(), "upper bound at {k}");
            }
            for &k in &[-100.0, -5.0, -0.3, 0.4, 7.0] {
                assert!(
                    slice.deriv_side(k, Side::Right) > -4.0,
                    "lower bound at {k}"
                );
            }
        }
    }
}
