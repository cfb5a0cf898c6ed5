//! Plain-text surface configuration.
//!
//! A surface serialises to `key=value` lines with this fixed vocabulary:
//!
//! ```text
//! psi.kind     svi | nonsvi_sqrt | nonsvi_power
//! psi.rho      skew of the svi shape, in (−1, 1)
//! psi.nu       exponent of the nonsvi_power shape, > 1
//! phi.kind     decay | const | invsq
//! phi.alpha    scale parameter α > 0
//! theta.kind   linear | power | saturating
//! theta.a      level of the linear/power curves
//! theta.p      exponent of the power curve, in (0, 1]
//! theta.lambda rate of the saturating curve
//! theta.inf    long-run level of the saturating curve
//! ```
//!
//! Unknown keys are errors, as are parameters that do not belong to the
//! selected kind. `phi` defaults to `decay` with `alpha = 1` and `theta` to
//! `linear` with `a = 1` when their groups are omitted; `psi.kind` is
//! mandatory. Scale kinds: `decay` is `α(1−e^{-u})/u`, `const` is `α`,
//! `invsq` is `α/u²`.

use std::collections::BTreeMap;

use crate::error::{GsviError, Result};
use crate::scale::ScaleCurve;
use crate::shape::SmileShape;
use crate::surface::Surface;
use crate::theta::ThetaCurve;

/// Parsed surface configuration; build the surface with [`SurfaceConfig::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceConfig {
    pub psi_kind: String,
    pub rho: Option<f64>,
    pub nu: Option<f64>,
    pub phi_kind: String,
    pub alpha: f64,
    pub theta_kind: String,
    pub theta_a: Option<f64>,
    pub theta_p: Option<f64>,
    pub theta_lambda: Option<f64>,
    pub theta_inf: Option<f64>,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            psi_kind: "svi".to_string(),
            rho: None,
            nu: None,
            phi_kind: "decay".to_string(),
            alpha: 1.0,
            theta_kind: "linear".to_string(),
            theta_a: None,
            theta_p: None,
            theta_lambda: None,
            theta_inf: None,
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "psi.kind",
    "psi.rho",
    "psi.nu",
    "phi.kind",
    "phi.alpha",
    "theta.kind",
    "theta.a",
    "theta.p",
    "theta.lambda",
    "theta.inf",
];

impl SurfaceConfig {
    /// Parse `key=value` text. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(GsviError::config(format!(
                    "line {}: expected key=value, got {line:?}",
                    lineno + 1
                )));
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(GsviError::config(format!(
                    "line {}: unknown key {key:?}",
                    lineno + 1
                )));
            }
            if map
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(GsviError::config(format!(
                    "line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
        }
        Self::from_map(&map)
    }

    fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let number = |key: &str| -> Result<Option<f64>> {
            map.get(key)
                .map(|raw| {
                    raw.parse::<f64>()
                        .map_err(|_| GsviError::config(format!("key {key}: not a number: {raw:?}")))
                })
                .transpose()
        };

        let psi_kind = map
            .get("psi.kind")
            .ok_or_else(|| GsviError::config("psi.kind is required"))?
            .clone();
        let rho = number("psi.rho")?;
        let nu = number("psi.nu")?;
        match psi_kind.as_str() {
            "svi" => {
                if nu.is_some() {
                    return Err(GsviError::config("psi.nu does not apply to psi.kind=svi"));
                }
            }
            "nonsvi_sqrt" => {
                if rho.is_some() || nu.is_some() {
                    return Err(GsviError::config(
                        "psi.rho/psi.nu do not apply to psi.kind=nonsvi_sqrt",
                    ));
                }
            }
            "nonsvi_power" => {
                if rho.is_some() {
                    return Err(GsviError::config(
                        "psi.rho does not apply to psi.kind=nonsvi_power",
                    ));
                }
                if nu.is_none() {
                    return Err(GsviError::config("psi.kind=nonsvi_power requires psi.nu"));
                }
            }
            other => {
                return Err(GsviError::config(format!("unknown psi.kind {other:?}")));
            }
        }

        let phi_kind = map
            .get("phi.kind")
            .cloned()
            .unwrap_or_else(|| "decay".to_string());
        if !["decay", "const", "invsq"].contains(&phi_kind.as_str()) {
            return Err(GsviError::config(format!("unknown phi.kind {phi_kind:?}")));
        }
        let alpha = number("phi.alpha")?.unwrap_or(1.0);

        let theta_kind = map
            .get("theta.kind")
            .cloned()
            .unwrap_or_else(|| "linear".to_string());
        let theta_a = number("theta.a")?;
        let theta_p = number("theta.p")?;
        let theta_lambda = number("theta.lambda")?;
        let theta_inf = number("theta.inf")?;
        match theta_kind.as_str() {
            "linear" => {
                if theta_p.is_some() || theta_lambda.is_some() || theta_inf.is_some() {
                    return Err(GsviError::config(
                        "only theta.a applies to theta.kind=linear",
                    ));
                }
            }
            "power" => {
                if theta_lambda.is_some() || theta_inf.is_some() {
                    return Err(GsviError::config(
                        "only theta.a and theta.p apply to theta.kind=power",
                    ));
                }
            }
            "saturating" => {
                if theta_a.is_some() || theta_p.is_some() {
                    return Err(GsviError::config(
                        "only theta.inf and theta.lambda apply to theta.kind=saturating",
                    ));
                }
                if theta_inf.is_none() {
                    return Err(GsviError::config(
                        "theta.kind=saturating requires theta.inf",
                    ));
                }
            }
            other => {
                return Err(GsviError::config(format!("unknown theta.kind {other:?}")));
            }
        }

        Ok(SurfaceConfig {
            psi_kind,
            rho,
            nu,
            phi_kind,
            alpha,
            theta_kind,
            theta_a,
            theta_p,
            theta_lambda,
            theta_inf,
        })
    }

    /// Emit the `key=value` form of this configuration.
    pub fn to_config_string(&self) -> String {
        let mut out = format!("psi.kind={}\n", self.psi_kind);
        if let Some(rho) = self.rho {
            out.push_str(&format!("psi.rho={rho}\n"));
        }
        if let Some(nu) = self.nu {
            out.push_str(&format!("psi.nu={nu}\n"));
        }
        out.push_str(&format!("phi.kind={}\n", self.phi_kind));
        out.push_str(&format!("phi.alpha={}\n", self.alpha));
        out.push_str(&format!("theta.kind={}\n", self.theta_kind));
        if let Some(a) = self.theta_a {
            out.push_str(&format!("theta.a={a}\n"));
        }
        if let Some(p) = self.theta_p {
            out.push_str(&format!("theta.p={p}\n"));
        }
        if let Some(lambda) = self.theta_lambda {
            out.push_str(&format!("theta.lambda={lambda}\n"));
        }
        if let Some(inf) = self.theta_inf {
            out.push_str(&format!("theta.inf={inf}\n"));
        }
        out
    }

    /// Build the surface this configuration describes.
    pub fn build(&self) -> Result<Surface> {
        let shape = match self.psi_kind.as_str() {
            "svi" => SmileShape::svi(self.rho.unwrap_or(0.0))?,
            "nonsvi_sqrt" => SmileShape::sqrt_kink(),
            "nonsvi_power" => SmileShape::power_law(
                self.nu
                    .ok_or_else(|| GsviError::config("psi.kind=nonsvi_power requires psi.nu"))?,
            )?,
            other => return Err(GsviError::config(format!("unknown psi.kind {other:?}"))),
        };
        let scale = match self.phi_kind.as_str() {
            "decay" => ScaleCurve::decay(self.alpha)?,
            "const" => ScaleCurve::constant(self.alpha)?,
            "invsq" => ScaleCurve::power(self.alpha, 2.0)?,
            other => return Err(GsviError::config(format!("unknown phi.kind {other:?}"))),
        };
        let theta = match self.theta_kind.as_str() {
            "linear" => ThetaCurve::linear(self.theta_a.unwrap_or(1.0))?,
            "power" => ThetaCurve::power(self.theta_a.unwrap_or(1.0), self.theta_p.unwrap_or(1.0))?,
            "saturating" => ThetaCurve::saturating(
                self.theta_inf
                    .ok_or_else(|| GsviError::config("theta.kind=saturating requires theta.inf"))?,
                self.theta_lambda.unwrap_or(1.0),
            )?,
            other => return Err(GsviError::config(format!("unknown theta.kind {other:?}"))),
        };
        Ok(Surface::new(shape, scale, theta))
    }
}
