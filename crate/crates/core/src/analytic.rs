//! Closed-form pressure–volume relations of inflated spheres.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-form reference for a spherical membrane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceCurve {
    /// Incompressible Neo-Hookean balloon.
    Balloon {
        radius: f64,
        #[serde(rename = "muT")]
        mu_t: f64,
    },
    /// Liquid droplet with constant surface tension.
    Droplet { radius: f64, gamma: f64 },
}

impl ReferenceCurve {
    pub fn pressure(&self, v_ratio: f64) -> Result<f64> {
        match *self {
            ReferenceCurve::Balloon { radius, mu_t } => balloon_pressure(v_ratio, mu_t, radius),
            ReferenceCurve::Droplet { radius, gamma } => droplet_pressure(v_ratio, gamma, radius),
        }
    }

    /// `μT/R` or `γ/R`.
    pub fn pressure_unit(&self) -> f64 {
        match *self {
            ReferenceCurve::Balloon { radius, mu_t } => mu_t / radius,
            ReferenceCurve::Droplet { radius, gamma } => gamma / radius,
        }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            ReferenceCurve::Balloon { radius, .. } | ReferenceCurve::Droplet { radius, .. } => {
                radius
            }
        }
    }
}

fn check(v_ratio: f64, modulus: f64, radius: f64) -> Result<()> {
    if !(v_ratio.is_finite() && v_ratio > 0.0) {
        return Err(Error::InvalidReference(format!(
            "volume ratio must be positive, got {v_ratio}"
        )));
    }
    if !(modulus.is_finite() && modulus > 0.0 && radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidReference(
            "parameters must be positive".into(),
        ));
    }
    Ok(())
}

/// `p = (μT/R)·2((V₀/V)^{1/3} − (V₀/V)^{7/3})`.
pub fn balloon_pressure(v_ratio: f64, mu_t: f64, radius: f64) -> Result<f64> {
    check(v_ratio, mu_t, radius)?;
    let s = v_ratio.recip().cbrt();
    Ok(mu_t / radius * 2.0 * (s - s.powi(7)))
}

/// `p = (γ/R)·2(V₀/V)^{1/3}`.
pub fn droplet_pressure(v_ratio: f64, gamma: f64, radius: f64) -> Result<f64> {
    check(v_ratio, gamma, radius)?;
    Ok(gamma / radius * 2.0 * v_ratio.recip().cbrt())
}
