//! Butterfly-arbitrage checks through the second coupling condition.
//!
//! Writing `N(z) = (1 − z·Ψ'/(2Ψ))²`, `G(z) = Ψ'²/Ψ − 2Ψ''` and
//! `D_u(z) = G(z)/(4u) + Ψ'(z)²/16`, the density operator of the slice at ATM
//! variance `u` is `g = N(z) − (u·φ(u))²·D_u(z)`, so the slice density stays
//! non-negative exactly when
//!
//! ```text
//! (u·φ(u))² ≤ inf { N(z)/D_u(z) : z ∈ Z₊(u) },   Z₊(u) = { D_u > 0 },
//! ```
//!
//! for every attainable `u`. For asymptotically linear shapes the condition
//! splits into a per-`u` infimum over `Z̄₊ = {G > 0}` plus a wing condition on
//! `M_∞ = lim u·φ(u)`: when `θ_∞ = ∞` it reads
//! `M_∞ ≤ inf_{Z̄₋} |4/Ψ' − 2z/Ψ|`, and when `θ_∞ < ∞` the infimum of
//! `N/D_{θ_∞}` over `Z̄₋ ∩ Z₊(θ_∞)` bounds `M_∞²`. Kinked shapes additionally
//! need every jump of `Ψ'` to be non-negative (each jump contributes a point
//! mass to the density), and absence of static arbitrage also needs the
//! large-moneyness condition `θφ(θ)·α₊ < 2`.
//!
//! Infima are located by a wide logarithmic scan refined with golden-section
//! search; on unbounded regions the analytic wing value `4/α±²` (or `2/|α±|`
//! for the wing cap) competes with the scan. For the symmetric SVI shape the
//! per-`u` infimum has the closed form implemented in [`sym_svi`].

use serde::Serialize;

use crate::error::{GsviError, Result};
use crate::num;
use crate::scale::ScaleCurve;
use crate::shape::{Side, SmileShape};
use crate::surface::Surface;
use crate::theta::ThetaCurve;

/// Margin tolerance used by the butterfly verdicts.
pub const MARGIN_TOL: f64 = 1e-9;

/// Jump-positivity tolerance: declared jumps are exact data.
pub const JUMP_TOL: f64 = 1e-12;

/// Region over which the coupling infimum is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    /// `Z₊(u) = { z ∉ knots : D_u(z) > 0 }`.
    ZPlus,
    /// `Z̄₊ = { z ∉ knots : G(z) > 0 }`.
    ZBarPlus,
    /// `Z̄₋ ∩ Z₊(u) = { z ∉ knots : G(z) ≤ 0, D_u(z) > 0 }`.
    ZBarMinusCapZPlus,
}

/// Sign-change boundaries of `Z̄₊` plus membership predicates.
#[derive(Debug, Clone)]
pub struct RegionClassification {
    shape: SmileShape,
    /// Roots of `G`, bracketed to 1e-10, sorted.
    pub boundaries: Vec<f64>,
}

/// `G(z) = Ψ'(z)²/Ψ(z) − 2Ψ''(z)`, the curvature statistic behind `Z̄₊`.
pub fn curvature_stat(shape: &SmileShape, z: f64) -> Result<f64> {
    let dpsi = shape.deriv(z)?;
    Ok(dpsi * dpsi / shape.value(z) - 2.0 * shape.deriv2(z)?)
}

fn curvature_stat_unchecked(shape: &SmileShape, z: f64) -> f64 {
    let dpsi = shape.deriv_side(z, Side::Right);
    dpsi * dpsi / shape.value(z) - 2.0 * shape.deriv2_side(z, Side::Right)
}

/// Locate the sign-change boundaries of `G` and build membership predicates.
pub fn classify_regions(shape: &SmileShape) -> RegionClassification {
    let mut grid = num::symmetric_log_grid(1e-6, 1e4, 1200);
    grid.retain(|&z| !shape.is_knot(z));
    for &a in shape.knots() {
        let eps = 1e-8 * (1.0 + a.abs());
        grid.push(a - eps);
        grid.push(a + eps);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut boundaries = Vec::new();
    let mut prev_z = grid[0];
    let mut prev_g = curvature_stat_unchecked(shape, prev_z);
    for &z in &grid[1..] {
        let g = curvature_stat_unchecked(shape, z);
        // a sign flip across a knot is the knot's exclusion, not a root
        let knot_between = shape.knots().iter().any(|&a| prev_z < a && a < z);
        if !knot_between && (prev_g > 0.0) != (g > 0.0) {
            let root = num::bisect(|x| curvature_stat_unchecked(shape, x), prev_z, z, 1e-12);
            boundaries.push(root);
        }
        prev_z = z;
        prev_g = g;
    }
    RegionClassification {
        shape: shape.clone(),
        boundaries,
    }
}

impl RegionClassification {
    /// Membership in `Z̄₊` (knots excluded).
    pub fn in_zbar_plus(&self, z: f64) -> bool {
        !self.shape.is_knot(z) && curvature_stat_unchecked(&self.shape, z) > 0.0
    }

    /// Membership in `Z₊(u)` (knots excluded).
    pub fn in_z_plus(&self, u: f64, z: f64) -> bool {
        if self.shape.is_knot(z) {
            return false;
        }
        let dpsi = self.shape.deriv_side(z, Side::Right);
        curvature_stat_unchecked(&self.shape, z) / (4.0 * u) + dpsi * dpsi / 16.0 > 0.0
    }
}

/// Per-region infimum of the coupling ratio.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ButterflyBound {
    /// Variance level the denominator was evaluated at.
    pub u: f64,
    /// Infimum of `N/D_u` over the region; `f64::INFINITY` when empty.
    pub bound: f64,
    /// Interior location of the infimum, `None` when the region is empty or
    /// the infimum is attained in the wing limit.
    pub argmin_z: Option<f64>,
    /// Region scanned.
    pub region: RegionKind,
}

/// Precomputed scan table shared by all `u` levels of one shape.
struct ScanTable {
    z: Vec<f64>,
    num: Vec<f64>,
    g: Vec<f64>,
    dpsi_sq: Vec<f64>,
}

fn scan_table(shape: &SmileShape, boundaries: &[f64]) -> ScanTable {
    let mut zs = num::symmetric_log_grid(1e-4, 1e4, 2000);
    for &a in shape.knots() {
        let eps = 1e-8 * (1.0 + a.abs());
        zs.push(a - eps);
        zs.push(a + eps);
    }
    for &b in boundaries {
        let eps = 1e-10 * (1.0 + b.abs());
        zs.push(b - eps);
        zs.push(b);
        zs.push(b + eps);
    }
    zs.retain(|&z| !shape.is_knot(z));
    zs.sort_by(f64::total_cmp);
    zs.dedup();
    let mut num_v = Vec::with_capacity(zs.len());
    let mut g_v = Vec::with_capacity(zs.len());
    let mut d_v = Vec::with_capacity(zs.len());
    for &z in &zs {
        let psi = shape.value(z);
        let dpsi = shape.deriv_side(z, Side::Right);
        let d2psi = shape.deriv2_side(z, Side::Right);
        let half = 1.0 - z * dpsi / (2.0 * psi);
        num_v.push(half * half);
        g_v.push(dpsi * dpsi / psi - 2.0 * d2psi);
        d_v.push(dpsi * dpsi);
    }
    ScanTable {
        z: zs,
        num: num_v,
        g: g_v,
        dpsi_sq: d_v,
    }
}

fn member(table: &ScanTable, i: usize, u: f64, region: RegionKind) -> bool {
    let denom = table.g[i] / (4.0 * u) + table.dpsi_sq[i] / 16.0;
    match region {
        RegionKind::ZPlus => denom > 0.0,
        RegionKind::ZBarPlus => table.g[i] > 0.0,
        RegionKind::ZBarMinusCapZPlus => table.g[i] <= 0.0 && denom > 0.0,
    }
}

fn ratio_at(shape: &SmileShape, u: f64, region: RegionKind, z: f64) -> f64 {
    if shape.is_knot(z) {
        return f64::INFINITY;
    }
    let psi = shape.value(z);
    let dpsi = shape.deriv_side(z, Side::Right);
    let d2psi = shape.deriv2_side(z, Side::Right);
    let g = dpsi * dpsi / psi - 2.0 * d2psi;
    let denom = g / (4.0 * u) + dpsi * dpsi / 16.0;
    let ok = match region {
        RegionKind::ZPlus => denom > 0.0,
        RegionKind::ZBarPlus => g > 0.0,
        RegionKind::ZBarMinusCapZPlus => g <= 0.0 && denom > 0.0,
    };
    if !ok {
        return f64::INFINITY;
    }
    let half = 1.0 - z * dpsi / (2.0 * psi);
    half * half / denom
}

fn bound_from_table(
    shape: &SmileShape,
    table: &ScanTable,
    u: f64,
    region: RegionKind,
) -> ButterflyBound {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..table.z.len() {
        if !member(table, i, u, region) {
            continue;
        }
        let denom = table.g[i] / (4.0 * u) + table.dpsi_sq[i] / 16.0;
        let value = table.num[i] / denom;
        if best.is_none_or(|(_, b)| value < b) {
            best = Some((i, value));
        }
    }

    // wing limits compete on regions that reach the scan edges
    let mut tail: Option<f64> = None;
    if let (Some(neg), Some(pos)) = (shape.slope_neg(), shape.slope_pos()) {
        let last = table.z.len() - 1;
        if member(table, last, u, region) && pos != 0.0 {
            tail = Some(4.0 / (pos * pos));
        }
        if member(table, 0, u, region) && neg != 0.0 {
            let cand = 4.0 / (neg * neg);
            tail = Some(tail.map_or(cand, |t: f64| t.min(cand)));
        }
    }

    let refined = best.map(|(i, coarse)| {
        let lo = if i > 0 { table.z[i - 1] } else { table.z[i] };
        let hi = if i + 1 < table.z.len() {
            table.z[i + 1]
        } else {
            table.z[i]
        };
        let (z_min, val) = num::golden_min(|z| ratio_at(shape, u, region, z), lo, hi, 1e-10);
        if val < coarse {
            (z_min, val)
        } else {
            (table.z[i], coarse)
        }
    });

    match (refined, tail) {
        (None, None) => ButterflyBound {
            u,
            bound: f64::INFINITY,
            argmin_z: None,
            region,
        },
        (None, Some(t)) => ButterflyBound {
            u,
            bound: t,
            argmin_z: None,
            region,
        },
        (Some((z, v)), None) => ButterflyBound {
            u,
            bound: v,
            argmin_z: Some(z),
            region,
        },
        (Some((z, v)), Some(t)) => {
            if t < v {
                ButterflyBound {
                    u,
                    bound: t,
                    argmin_z: None,
                    region,
                }
            } else {
                ButterflyBound {
                    u,
                    bound: v,
                    argmin_z: Some(z),
                    region,
                }
            }
        }
    }
}

/// Infimum of `N/D_u` over the requested region (`∞` when empty).
pub fn butterfly_bound(shape: &SmileShape, u: f64, region: RegionKind) -> ButterflyBound {
    let classification = classify_regions(shape);
    let table = scan_table(shape, &classification.boundaries);
    bound_from_table(shape, &table, u, region)
}

/// Closed forms of the per-`u` infimum for the symmetric SVI shape.
///
/// With `y = √(1 + z²)`, the coupling ratio over `Z̄₊ = {y > 2}` equals
/// `A(y, u) = 16·u·y·(y+1) / (8(y−2) + u·y·(y−1))`; for `u < 4` its infimum is
/// attained at `Y(u)`, the root of `(1 − u/4)y² − 4y − 2` beyond 2, and for
/// `u ≥ 4` in the limit `y → ∞`, where `A → 16`.
pub mod sym_svi {
    use crate::error::{GsviError, Result};

    /// `A(y, u)` on its effective domain.
    pub fn a_func(y: f64, u: f64) -> f64 {
        16.0 * u * y * (y + 1.0) / (8.0 * (y - 2.0) + u * y * (y - 1.0))
    }

    /// Argmin `Y(u) = a + √(a² + a)` with `a = 2/(1 − u/4)`, for `0 ≤ u < 4`.
    pub fn y_argmin(u: f64) -> Result<f64> {
        if !(0.0..4.0).contains(&u) {
            return Err(GsviError::domain(format!(
                "Y(u) is defined for 0 <= u < 4, got {u}"
            )));
        }
        let a = 2.0 / (1.0 - 0.25 * u);
        Ok(a + (a * a + a).sqrt())
    }

    /// `A*(u) = A(Y(u), u)`, increasing from 0 to 16 on `[0, 4)`.
    pub fn a_star(u: f64) -> Result<f64> {
        Ok(a_func(y_argmin(u)?, u))
    }
}

/// `(u·φ_α(u))²·(1/u + 1/4)` for the bounded-decay scale `φ_α(u) = α(1−e^{-u})/u`.
///
/// Keeping this below 1 for all `u` is sufficient for the per-`u` coupling
/// condition of the power-law shapes; its maximum over `u` sits near 1.87 and
/// pins the largest admissible `α` near 1.33.
pub fn decay_load(alpha: f64, u: f64) -> f64 {
    let prod = alpha * (-f64::exp_m1(-u));
    prod * prod * (1.0 / u + 0.25)
}

/// Wing-cap infimum `inf_{Z̄₋} |4/Ψ' − 2z/Ψ|` of the power-law shape, attained
/// at the region boundary `±(2(ν−1))^{1/ν}`.
pub fn power_law_wing_cap(nu: f64) -> f64 {
    4.0 * nu * (2.0 * nu - 2.0).powf((1.0 - nu) / nu) * (2.0 * nu - 1.0).powf(-1.0 / nu)
}

/// Scope of the wing-cap infimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WingCapRegion {
    /// All of `ℝ` minus knots.
    All,
    /// `Z̄₋` only (the scope used by the diverging-`θ_∞` wing condition).
    ZBarMinus,
}

/// Infimum of `|4/Ψ'(z) − 2z/Ψ(z)|` over the requested scope.
///
/// Points with `Ψ' = 0` contribute `+∞`. On unbounded scopes the wing limits
/// `2/|α±|` compete with the scan. Requires an asymptotically linear shape.
pub fn wing_cap_infimum(shape: &SmileShape, region: WingCapRegion) -> Result<f64> {
    if !shape.is_asymptotically_linear() {
        return Err(GsviError::domain(
            "wing cap needs an asymptotically linear shape",
        ));
    }
    let classification = classify_regions(shape);
    let expr = |z: f64| -> f64 {
        if shape.is_knot(z) {
            return f64::INFINITY;
        }
        if region == WingCapRegion::ZBarMinus && classification.in_zbar_plus(z) {
            return f64::INFINITY;
        }
        let dpsi = shape.deriv_side(z, Side::Right);
        (4.0 / dpsi - 2.0 * z / shape.value(z)).abs()
    };
    let mut zs = num::symmetric_log_grid(1e-4, 1e4, 1500);
    zs.extend_from_slice(&classification.boundaries);
    for &a in shape.knots() {
        let eps = 1e-8 * (1.0 + a.abs());
        zs.push(a - eps);
        zs.push(a + eps);
    }
    zs.retain(|&z| !shape.is_knot(z));
    zs.sort_by(f64::total_cmp);
    zs.dedup();
    let mut best = f64::INFINITY;
    let mut best_i = None;
    for (i, &z) in zs.iter().enumerate() {
        let v = expr(z);
        if v < best {
            best = v;
            best_i = Some(i);
        }
    }
    if let Some(i) = best_i {
        let lo = zs[i.saturating_sub(1)];
        let hi = zs[(i + 1).min(zs.len() - 1)];
        let (_, refined) = num::golden_min(expr, lo, hi, 1e-10);
        best = best.min(refined);
    }
    if region == WingCapRegion::All {
        let pos = shape.slope_pos().expect("checked linear");
        let neg = shape.slope_neg().expect("checked linear");
        best = best.min(2.0 / pos.abs()).min(2.0 / neg.abs());
    }
    Ok(best)
}

/// Margin of the easy necessary wing condition `M_∞ ≤ inf_ℝ |4/Ψ' − 2z/Ψ|`.
pub fn wing_cap_margin(shape: &SmileShape, m_infinity: f64) -> Result<f64> {
    Ok(wing_cap_infimum(shape, WingCapRegion::All)? - m_infinity)
}

/// One row of the per-`u` verdict.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PerU {
    pub u: f64,
    /// `(u·φ(u))²`.
    pub lhs: f64,
    /// Coupling infimum at this `u`; `None` encodes an empty region (`∞`).
    pub bound: Option<f64>,
    pub argmin_z: Option<f64>,
}

/// Wing condition on `M_∞`, in the branch matching `θ_∞`.
#[derive(Debug, Clone, Serialize)]
pub struct WingCondition {
    /// Whether the condition applies (asymptotically linear shape).
    pub applies: bool,
    /// "finite" or "infinite" `θ_∞` branch, or "n/a".
    pub branch: &'static str,
    /// `M_∞`; `None` means the product `u·φ(u)` diverges.
    pub m_infinity: Option<f64>,
    /// The infimum bounding `M_∞` (or `M_∞²` in the finite branch).
    pub threshold: Option<f64>,
    /// Threshold minus the tested quantity; negative fails.
    pub margin: Option<f64>,
    pub pass: bool,
}

/// Full butterfly verdict of a surface.
#[derive(Debug, Clone, Serialize)]
pub struct ButterflyReport {
    /// Conjunction of every applicable sub-condition.
    pub pass: bool,
    pub per_u: Vec<PerU>,
    pub m_inf_condition: WingCondition,
    /// All declared `Ψ'` jumps non-negative.
    pub jumps_ok: bool,
    /// Large-moneyness condition `θφ(θ)·α₊ < 2`; `None` when unknown (shape
    /// not asymptotically linear).
    pub lmb_ok: Option<bool>,
    /// Margin `2 − sup θφ(θ)·α₊`.
    pub lmb_margin: Option<f64>,
    /// Set when the large-moneyness condition holds only with equality.
    pub lmb_marginal: bool,
}

/// Butterfly check of a surface over a grid of attainable variance levels.
///
/// Asymptotically linear shapes go through the split formulation (per-`u`
/// infimum over `Z̄₊` plus the wing condition); other shapes fall back to the
/// general per-`u` infimum over `Z₊(u)`. Failed preconditions are reported in
/// the verdict, never thrown.
pub fn check_butterfly(surface: &Surface, u_grid: &[f64], tol: f64) -> Result<ButterflyReport> {
    let shape = &surface.shape;
    let scale = &surface.scale;
    let linear = shape.is_asymptotically_linear();
    let classification = classify_regions(shape);
    let table = scan_table(shape, &classification.boundaries);

    let per_u_region = if linear {
        RegionKind::ZBarPlus
    } else {
        RegionKind::ZPlus
    };
    let mut per_u = Vec::with_capacity(u_grid.len());
    let mut per_u_ok = true;
    for &u in u_grid {
        if u <= 0.0 {
            return Err(GsviError::grid(format!(
                "variance grid must be positive, got {u}"
            )));
        }
        let prod = u * scale.value(u);
        let lhs = prod * prod;
        let bound = bound_from_table(shape, &table, u, per_u_region);
        if lhs > bound.bound + tol {
            per_u_ok = false;
        }
        per_u.push(PerU {
            u,
            lhs,
            bound: bound.bound.is_finite().then_some(bound.bound),
            argmin_z: bound.argmin_z,
        });
    }

    let theta_inf = surface.theta.infinity();
    let m_infinity = scale.m_infinity();
    let m_inf_condition = if !linear {
        WingCondition {
            applies: false,
            branch: "n/a",
            m_infinity,
            threshold: None,
            margin: None,
            pass: true,
        }
    } else if theta_inf.is_finite() {
        let bound = bound_from_table(shape, &table, theta_inf, RegionKind::ZBarMinusCapZPlus);
        let threshold = bound.bound;
        let (margin, pass) = match m_infinity {
            Some(m) => (threshold - m * m, m * m <= threshold + tol),
            None => (f64::NEG_INFINITY, !threshold.is_finite()),
        };
        WingCondition {
            applies: true,
            branch: "finite",
            m_infinity,
            threshold: threshold.is_finite().then_some(threshold),
            margin: margin.is_finite().then_some(margin),
            pass,
        }
    } else {
        let threshold = wing_cap_infimum(shape, WingCapRegion::ZBarMinus)?;
        let (margin, pass) = match m_infinity {
            Some(m) => (threshold - m, m <= threshold + tol),
            None => (f64::NEG_INFINITY, !threshold.is_finite()),
        };
        WingCondition {
            applies: true,
            branch: "infinite",
            m_infinity,
            threshold: threshold.is_finite().then_some(threshold),
            margin: margin.is_finite().then_some(margin),
            pass,
        }
    };

    let jumps_ok = shape.jumps().iter().all(|&j| j >= -JUMP_TOL);

    let (lmb_ok, lmb_margin, lmb_marginal) = if linear {
        let slope = shape.slope_pos().expect("linear");
        let mut sup = u_grid
            .iter()
            .map(|&u| u * scale.value(u) * slope)
            .fold(f64::NEG_INFINITY, f64::max);
        if let Some(m) = m_infinity {
            sup = sup.max(m * slope);
        } else {
            sup = f64::INFINITY;
        }
        let margin = 2.0 - sup;
        if margin > tol {
            (Some(true), Some(margin), false)
        } else if margin >= -tol {
            (Some(true), Some(margin), true)
        } else {
            (Some(false), Some(margin), false)
        }
    } else {
        (None, None, false)
    };

    Ok(ButterflyReport {
        pass: per_u_ok && m_inf_condition.pass && jumps_ok && lmb_ok != Some(false),
        per_u,
        m_inf_condition,
        jumps_ok,
        lmb_ok,
        lmb_margin,
        lmb_marginal,
    })
}

/// Butterfly check on the default variance grid.
pub fn check_butterfly_default(surface: &Surface) -> Result<ButterflyReport> {
    let grid = crate::calendar::default_u_grid(surface.theta.infinity());
    check_butterfly(surface, &grid, MARGIN_TOL)
}

/// One of the five classical sufficient conditions for SVI surfaces.
#[derive(Debug, Clone, Serialize)]
pub struct GjCondition {
    pub name: &'static str,
    pub pass: bool,
    /// Distance to the boundary of the condition; negative fails.
    pub margin: f64,
    pub witness: f64,
}

/// Report of the five sufficient conditions for an SVI surface.
#[derive(Debug, Clone, Serialize)]
pub struct GjReport {
    pub all_pass: bool,
    pub conditions: Vec<GjCondition>,
}

/// Sufficient no-static-arbitrage conditions for the SVI shape `Ψ_ρ`:
///
/// ```text
/// 1. θ' ≥ 0                     2. φ(u) + u·φ'(u) ≥ 0     3. φ'(u) < 0
/// 4. u·φ(u)·(1 + |ρ|) < 4       5. u·φ(u)²·(1 + |ρ|) ≤ 4
/// ```
pub fn gj_sufficient(
    rho: f64,
    scale: &ScaleCurve,
    theta: &ThetaCurve,
    u_grid: &[f64],
    t_grid: &[f64],
    tol: f64,
) -> Result<GjReport> {
    if rho.abs() >= 1.0 {
        return Err(GsviError::invalid(format!("|rho| < 1 required, got {rho}")));
    }
    let one_plus_rho = 1.0 + rho.abs();

    fn scan(values: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
        values
            .reduce(|a, b| if b.1 < a.1 { b } else { a })
            .expect("non-empty grid")
    }

    let (t_w, theta_min) = scan(t_grid.iter().map(|&t| (t, theta.deriv(t))));
    let (u2_w, cond2_min) = scan(
        u_grid
            .iter()
            .map(|&u| (u, scale.value(u) + u * scale.deriv(u))),
    );
    let (u3_w, neg_slope_min) = scan(u_grid.iter().map(|&u| (u, -scale.deriv(u))));
    let (u4_w, cond4_min) = scan(
        u_grid
            .iter()
            .map(|&u| (u, 4.0 - u * scale.value(u) * one_plus_rho)),
    );
    let (u5_w, cond5_min) = scan(u_grid.iter().map(|&u| {
        let phi = scale.value(u);
        (u, 4.0 - u * phi * phi * one_plus_rho)
    }));

    let conditions = vec![
        GjCondition {
            name: "theta_nondecreasing",
            pass: theta_min >= -tol,
            margin: theta_min,
            witness: t_w,
        },
        GjCondition {
            name: "product_slope_nonnegative",
            pass: cond2_min >= -tol,
            margin: cond2_min,
            witness: u2_w,
        },
        GjCondition {
            name: "scale_decreasing",
            pass: neg_slope_min > tol,
            margin: neg_slope_min,
            witness: u3_w,
        },
        GjCondition {
            name: "product_below_four",
            pass: cond4_min > tol,
            margin: cond4_min,
            witness: u4_w,
        },
        GjCondition {
            name: "squared_product_at_most_four",
            pass: cond5_min >= -tol,
            margin: cond5_min,
            witness: u5_w,
        },
    ];
    Ok(GjReport {
        all_pass: conditions.iter().all(|c| c.pass),
        conditions,
    })
}

/// Result of the wing upper bound on the shape itself.
#[derive(Debug, Clone, Serialize)]
pub struct ShapeUpperBound {
    /// Start of the verified wing.
    pub z_plus: f64,
    /// Offset coefficient `κ ≥ 0` of the bound.
    pub kappa: f64,
    /// Whether `Ψ(z) ≤ κ² + 2z/M_∞ − κ√(κ² + 2z/M_∞)` held on `[z₊, 10⁴]`.
    pub pass: bool,
    /// Worst value of `bound − Ψ` on the verified wing.
    pub worst_margin: f64,
    /// Location of the worst margin.
    pub witness_z: Option<f64>,
    /// Set when no admissible `(z₊, κ ≥ 0)` exists; the bound then fails.
    pub obstruction: Option<String>,
}

/// Necessary wing upper bound on an arbitrage-free shape:
/// `Ψ(z) ≤ κ² + 2z/M_∞ − κ·√(κ² + 2z/M_∞)` for `z ≥ z₊`.
///
/// `z₊` is the first point past which both `4/Ψ' − 2z/Ψ ≥ M_∞` holds and the
/// offset `K_s = z/√Ψ(z) − (M_∞/2)√Ψ(z)` is non-negative;
/// `κ = K_s/(√2·K_l)` with `K_l = M_∞/2`. Requires a positive right wing
/// slope and a finite `M_∞ > 0`.
pub fn shape_upper_bound(shape: &SmileShape, m_infinity: f64) -> Result<ShapeUpperBound> {
    let slope = shape.slope_pos().ok_or_else(|| {
        GsviError::domain("shape upper bound needs a declared positive wing slope")
    })?;
    if slope <= 0.0 {
        return Err(GsviError::domain(format!(
            "shape upper bound needs slope_pos > 0, got {slope}"
        )));
    }
    if !(m_infinity > 0.0 && m_infinity.is_finite()) {
        return Err(GsviError::domain(format!(
            "shape upper bound needs finite M_infinity > 0, got {m_infinity}"
        )));
    }

    let mut grid: Vec<f64> = num::logspace(1e-6, 1e4, 2000);
    grid.retain(|&z| !shape.is_knot(z));

    let wing_expr = |z: f64| {
        let dpsi = shape.deriv_side(z, Side::Right);
        4.0 / dpsi - 2.0 * z / shape.value(z)
    };

    // smallest grid point past which the wing expression stays >= M_inf
    let mut z_expr: Option<f64> = None;
    let mut suffix_ok = true;
    for &z in grid.iter().rev() {
        if wing_expr(z) < m_infinity - 1e-12 {
            suffix_ok = false;
        }
        if suffix_ok {
            z_expr = Some(z);
        }
    }
    let Some(z_expr) = z_expr else {
        return Ok(ShapeUpperBound {
            z_plus: f64::NAN,
            kappa: f64::NAN,
            pass: false,
            worst_margin: f64::NEG_INFINITY,
            witness_z: None,
            obstruction: Some(format!(
                "4/Psi' - 2z/Psi stays below M_infinity = {m_infinity} in the far wing"
            )),
        });
    };

    // smallest z with K_s(z) >= 0, i.e. 2z/Psi(z) >= M_inf (increasing)
    let ks_stat = |z: f64| 2.0 * z / shape.value(z) - m_infinity;
    let z_offset = if ks_stat(z_expr.max(1e-12)) >= 0.0 {
        z_expr
    } else if ks_stat(1e4) < 0.0 {
        return Ok(ShapeUpperBound {
            z_plus: f64::NAN,
            kappa: f64::NAN,
            pass: false,
            worst_margin: f64::NEG_INFINITY,
            witness_z: None,
            obstruction: Some(format!(
                "2z/Psi(z) never reaches M_infinity = {m_infinity}: no admissible offset"
            )),
        });
    } else {
        num::bisect(ks_stat, z_expr.max(1e-12), 1e4, 1e-12)
    };

    let z_plus = z_expr.max(z_offset);
    let u_plus = shape.value(z_plus);
    let k_l = 0.5 * m_infinity;
    let k_s = (z_plus / u_plus.sqrt() - k_l * u_plus.sqrt()).max(0.0);
    let kappa = k_s / (std::f64::consts::SQRT_2 * k_l);

    let bound = |z: f64| {
        let root = (kappa * kappa + 2.0 * z / m_infinity).sqrt();
        kappa * kappa + 2.0 * z / m_infinity - kappa * root
    };
    let mut worst_margin = f64::INFINITY;
    let mut witness_z = z_plus;
    let check_grid = num::logspace(z_plus.max(1e-9), 1e4, 2000);
    for z in std::iter::once(z_plus).chain(check_grid) {
        let margin = bound(z) - shape.value(z);
        if margin < worst_margin {
            worst_margin = margin;
            witness_z = z;
        }
    }
    Ok(ShapeUpperBound {
        z_plus,
        kappa,
        pass: worst_margin >= -MARGIN_TOL,
        worst_margin,
        witness_z: Some(witness_z),
        obstruction: None,
    })
}
