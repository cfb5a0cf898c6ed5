//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide error enumeration.
#[derive(Debug, Error)]
pub enum GsviError {
    /// A constructor or operation received a parameter outside its stated domain.
    #[error("invalid parameter: {message}")]
    InvalidParameter { message: String },

    /// An evaluation was requested outside the mathematical domain (t ≤ 0, w ≤ 0, …).
    #[error("domain error: {message}")]
    Domain { message: String },

    /// A pointwise derivative was requested exactly at a kink; use the one-sided variant.
    #[error("evaluation at knot z = {z}: one-sided derivative required")]
    AtKnot { z: f64 },

    /// The surface violates a no-arbitrage condition where a clean slice was required.
    #[error("arbitrage detected: {message}")]
    Arbitrage { message: String },

    /// A grid failed a structural requirement (ordering, bounds, size).
    #[error("grid error: {message}")]
    Grid { message: String },

    /// A numeric routine failed to converge or produced an unusable value.
    #[error("numerical error: {message}")]
    Numerical { message: String },

    /// Text configuration could not be parsed.
    #[error("config error: {message}")]
    Config { message: String },
}

impl GsviError {
    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        GsviError::InvalidParameter {
            message: message.into(),
        }
    }

    pub(crate) fn domain(message: impl Into<String>) -> Self {
        GsviError::Domain {
            message: message.into(),
        }
    }

    pub(crate) fn arbitrage(message: impl Into<String>) -> Self {
        GsviError::Arbitrage {
            message: message.into(),
        }
    }

    pub(crate) fn grid(message: impl Into<String>) -> Self {
        GsviError::Grid {
            message: message.into(),
        }
    }

    pub(crate) fn numerical(message: impl Into<String>) -> Self {
        GsviError::Numerical {
            message: message.into(),
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        GsviError::Config {
            message: message.into(),
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, GsviError>;
