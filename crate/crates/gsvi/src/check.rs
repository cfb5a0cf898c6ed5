//! Aggregate no-arbitrage verification: analytic coupling conditions plus
//! brute-force price-level oracles, combined into a single verdict.

use serde::Serialize;

use crate::bs::{self, OracleReport};
use crate::butterfly::{self, ButterflyReport};
use crate::calendar::{self, CalendarVerdict};
use crate::error::Result;
use crate::num;
use crate::surface::Surface;

/// Grids and tolerance of a full check run.
#[derive(Debug, Clone)]
pub struct CheckConfig {
    /// Maturities scanned by the convexity oracle and the θ-slope check.
    pub t_list: Vec<f64>,
    /// Strike window (log-moneyness) and point count of the convexity oracle.
    pub k_min: f64,
    pub k_max: f64,
    pub k_n: usize,
    /// Log-moneyness points scanned by the maturity-monotonicity oracle.
    pub monotonicity_ks: Vec<f64>,
    /// Time grid of the maturity-monotonicity oracle.
    pub time_grid: Vec<f64>,
    /// Margin tolerance of the analytic verdicts.
    pub tol: f64,
    /// Margin tolerance of the price-level oracles.
    pub oracle_tol: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            t_list: vec![0.1, 0.5, 1.0, 2.0, 5.0, 10.0],
            k_min: -5.0,
            k_max: 5.0,
            k_n: 2001,
            monotonicity_ks: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            time_grid: num::linspace(0.01, 10.0, 101),
            tol: calendar::MARGIN_TOL,
            oracle_tol: 1e-10,
        }
    }
}

impl CheckConfig {
    /// Strike grid implied by the log-moneyness window.
    pub fn strike_grid(&self) -> Vec<f64> {
        num::linspace(self.k_min, self.k_max, self.k_n)
            .into_iter()
            .map(f64::exp)
            .collect()
    }
}

/// Combined verdict: analytic conditions and both oracles.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    /// Conjunction of every sub-verdict below.
    pub pass: bool,
    pub calendar: CalendarVerdict,
    pub butterfly: ButterflyReport,
    /// One convexity oracle per maturity in `t_list`.
    pub convexity: Vec<OracleReport>,
    /// One monotonicity oracle per log-moneyness in `monotonicity_ks`.
    pub monotonicity: Vec<OracleReport>,
}

impl CheckReport {
    /// Whether every price-level oracle passed.
    pub fn oracles_pass(&self, tol: f64) -> bool {
        self.convexity.iter().all(|o| o.passes(tol))
            && self.monotonicity.iter().all(|o| o.passes(tol))
    }
}

/// Run the full verification battery on a surface.
pub fn run_check(surface: &Surface, config: &CheckConfig) -> Result<CheckReport> {
    let theta_inf = surface.theta.infinity();
    let z_grid = calendar::default_z_grid();
    let u_grid = calendar::default_u_grid(theta_inf);

    let calendar =
        calendar::check_calendar(surface, &z_grid, &u_grid, &config.time_grid, config.tol)?;
    let butterfly = butterfly::check_butterfly(surface, &u_grid, config.tol)?;

    let strikes = config.strike_grid();
    let mut convexity = Vec::with_capacity(config.t_list.len());
    for &t in &config.t_list {
        convexity.push(bs::convexity_oracle(surface, t, &strikes)?);
    }
    let mut monotonicity = Vec::with_capacity(config.monotonicity_ks.len());
    for &k in &config.monotonicity_ks {
        monotonicity.push(bs::monotonicity_oracle(surface, k, &config.time_grid)?);
    }

    let oracles_ok = convexity.iter().all(|o| o.passes(config.oracle_tol))
        && monotonicity.iter().all(|o| o.passes(config.oracle_tol));

    Ok(CheckReport {
        pass: calendar.pass && butterfly.pass && butterfly.jumps_ok && oracles_ok,
        calendar,
        butterfly,
        convexity,
        monotonicity,
    })
}
