//! Generalised SVI total-variance surfaces.
//!
//! Builds surfaces of the form `w(k, t) = θ_t · Ψ(k·φ(θ_t))` from a smile
//! shape Ψ, a scale curve φ and an ATM total-variance curve θ, then:
//!
//! - verifies absence of calendar-spread and butterfly arbitrage, both through
//!   analytic coupling conditions on (Ψ, φ, θ) and through brute-force
//!   convexity/monotonicity oracles on Black-Scholes prices;
//! - extracts the risk-neutral density of log-moneyness, with point masses
//!   induced by kinks of Ψ, plus normalisation and martingale checks;
//! - computes Dupire local variance and the critical moment of the underlying
//!   from the wing slope of the smile.
//!
//! All types are immutable after construction and evaluation is pure, so every
//! operation can be called concurrently.

pub mod bs;
pub mod butterfly;
pub mod calendar;
pub mod check;
pub mod config;
pub mod density;
pub mod error;
pub mod num;
pub mod scale;
pub mod shape;
pub mod surface;
pub mod theta;

pub use error::{GsviError, Result};
pub use scale::ScaleCurve;
pub use shape::{Side, SmileShape};
pub use surface::{Surface, VarianceSlice};
pub use theta::ThetaCurve;
